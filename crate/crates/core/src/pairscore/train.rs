use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::data::{
    encode, ContextFeatureSet, DrugFeatureSet, EncodedData, FeatureMode, TripleDataset,
};
use super::model::{PairScorer, ScorerConfig};
use super::PairScoreError;
use crate::eval::auroc;
use crate::skipgram::sigmoid;

/// Rows per forward pass at inference time.
const PREDICT_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub scorer: ScorerConfig,
    pub seed: u64,
    /// Also train on every pair with the two drugs swapped.
    pub both_orders: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 8192,
            adam: AdamConfig::default(),
            scorer: ScorerConfig::default(),
            seed: 0,
            both_orders: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub valid_auroc: Option<f64>,
}

/// Trains a fresh scorer on `train` with shuffled minibatches.
///
/// Deterministic for a fixed `cfg.seed`.
pub fn train_pairscore(
    train: &EncodedData,
    valid: Option<&EncodedData>,
    mode: FeatureMode,
    cfg: &TrainConfig,
) -> Result<(PairScorer, Vec<EpochRecord>), PairScoreError> {
    if train.is_empty() {
        return Err(PairScoreError::EmptyTrainingSet);
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(PairScoreError::InvalidConfig(
            "epochs and batch size must be positive".into(),
        ));
    }
    let augmented;
    let train = if cfg.both_orders {
        augmented = train.with_swapped_pairs();
        &augmented
    } else {
        train
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = PairScorer::new(
        cfg.scorer.clone(),
        mode,
        train.xa.ncols(),
        train.xc.ncols(),
        &mut rng,
    )?;
    let mut adam = AdamState::new(cfg.adam, model.params().iter().map(|p| p.len()));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let b = train.select(batch);
            let (loss, grads) = model.loss_and_grads(
                b.xa.view(),
                b.xb.view(),
                b.xc.view(),
                &b.y,
                Some(&mut rng),
            )?;
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut adam, &mut model.params_mut(), &grads.slices());
        }
        let valid_auroc = match valid {
            Some(v) if !v.is_empty() => auroc_of(&model, v)?,
            _ => None,
        };
        history.push(EpochRecord {
            train_loss: loss_sum / train.len() as f64,
            valid_auroc,
        });
        if !model.is_finite() {
            return Err(PairScoreError::InvalidConfig(
                "training diverged (non-finite parameters)".into(),
            ));
        }
    }
    Ok((model, history))
}

fn auroc_of(model: &PairScorer, data: &EncodedData) -> Result<Option<f64>, PairScoreError> {
    let scores = predict(model, data)?;
    let labels: Vec<u8> = data.y.iter().map(|&y| y as u8).collect();
    Ok(auroc(&scores, &labels).ok())
}

/// Inference scores in `(0, 1)`, in row order.
pub fn predict(model: &PairScorer, data: &EncodedData) -> Result<Vec<f64>, PairScoreError> {
    let mut out = Vec::with_capacity(data.len());
    let n = data.len();
    let mut start = 0;
    while start < n {
        let end = (start + PREDICT_CHUNK).min(n);
        let rows = ndarray::s![start..end, ..];
        let z = model.logits::<ChaCha8Rng>(
            data.xa.slice(rows),
            data.xb.slice(rows),
            data.xc.slice(rows),
            None,
        )?;
        out.extend(z.iter().map(|&v| sigmoid(v)));
        start = end;
    }
    Ok(out)
}

/// Encodes `data` and scores every triple in order.
pub fn predict_triples(
    model: &PairScorer,
    data: &TripleDataset,
    drugs: &DrugFeatureSet,
    contexts: Option<&ContextFeatureSet>,
) -> Result<Vec<f64>, PairScoreError> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let enc = encode(data, &idx, drugs, contexts, model.mode)?;
    predict(model, &enc)
}
