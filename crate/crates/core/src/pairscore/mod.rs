//! Encoder-decoder drug pair scoring.
//!
//! Both drugs of a triple go through one shared drug encoder, the context
//! through a context encoder, and a head MLP maps the concatenated codes to
//! a logit. Training minimises mean binary cross entropy with Adam.

mod adam;
mod checkpoint;
mod data;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use data::{
    assemble_input, encode, ContextFeatureSet, DrugFeatureSet, EncodedData, FeatureMode, Triple,
    TripleDataset,
};
pub use model::{bce_loss, bce_with_logit, Dense, Gradients, Mlp, PairScorer, ScorerConfig};
pub use train::{predict, predict_triples, train_pairscore, EpochRecord, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PairScoreError {
    #[error("unknown drug `{0}`")]
    UnknownDrug(String),
    #[error("unknown context `{0}`")]
    UnknownContext(String),
    #[error("drug `{0}` has no embedding")]
    MissingEmbedding(String),
    #[error("drug `{0}` has no fingerprint")]
    MissingFingerprint(String),
    #[error("triple row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<PairScoreError>,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PairScoreError {
    pub(crate) fn at_row(self, row: usize) -> Self {
        PairScoreError::AtRow {
            row,
            source: Box::new(self),
        }
    }
}
