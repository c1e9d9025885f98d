use std::borrow::Cow;
use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::split::{cold_split, random_split, SplitKind, SplitPlan, SplitSpec};
use super::{auroc, EvalError};
use crate::corpus::{build_corpus, unigram_distribution};
use crate::fingerprint::{morgan_fingerprint, Fingerprint, DEFAULT_BITS, DEFAULT_RADIUS};
use crate::molgraph::MolecularGraph;
use crate::pairscore::{
    encode, predict, train_pairscore, ContextFeatureSet, DrugFeatureSet, FeatureMode, TrainConfig,
    TripleDataset,
};
use crate::par::Exec;
use crate::skipgram::{self, ImportedEmbeddings, SkipgramConfig};
use crate::substructure::{build_vocabulary, Inducer};

/// One embedding row per drug, in `ids` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DrugEmbeddings {
    pub ids: Vec<String>,
    pub matrix: Array2<f64>,
    pub inducer_tag: String,
    /// Mean loss per skipgram epoch; empty for imported tables.
    pub loss_history: Vec<f64>,
}

impl From<ImportedEmbeddings> for DrugEmbeddings {
    fn from(e: ImportedEmbeddings) -> Self {
        Self {
            ids: e.ids,
            matrix: e.matrix,
            inducer_tag: e.inducer_tag,
            loss_history: Vec::new(),
        }
    }
}

/// Pattern induction, corpus construction and skipgram training in one go.
pub fn embed_graphs(
    graphs: &[MolecularGraph],
    inducer: Inducer,
    cfg: &SkipgramConfig,
    exec: Exec,
) -> Result<DrugEmbeddings, EvalError> {
    cfg.validate()?;
    let (vocab, multisets) = build_vocabulary(graphs, inducer, exec)?;
    let corpus = build_corpus(&multisets, &vocab)?;
    let table = unigram_distribution(&corpus, cfg.unigram_exponent)?;
    let out = skipgram::train(&corpus, &table, cfg)?;
    Ok(DrugEmbeddings {
        ids: graphs.iter().map(|g| g.source_id().to_string()).collect(),
        matrix: out.table.graph_matrix,
        inducer_tag: inducer.to_string(),
        loss_history: out.loss_history,
    })
}

/// Fingerprints every graph and packs fingerprints plus (optional) embeddings
/// into a feature set.
pub fn build_drug_features(
    graphs: &[MolecularGraph],
    embeddings: Option<&DrugEmbeddings>,
    radius: u32,
    n_bits: usize,
    exec: Exec,
) -> Result<(DrugFeatureSet, Vec<Fingerprint>), EvalError> {
    let fps = exec.try_map(graphs, |g| morgan_fingerprint(g, radius, n_bits))?;
    let mut set = DrugFeatureSet::from_fingerprints(&fps)?;
    if let Some(e) = embeddings {
        for (id, row) in e.ids.iter().zip(e.matrix.rows()) {
            set.insert_embedding(id, row.to_vec())?;
        }
    }
    Ok((set, fps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub inducer: Inducer,
    pub skipgram: SkipgramConfig,
    pub train: TrainConfig,
    pub mode: FeatureMode,
    pub split: SplitSpec,
    pub fp_radius: u32,
    pub fp_bits: usize,
    /// Permute labels across triples before splitting (a null-model control).
    pub shuffle_labels: bool,
    pub use_context: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            inducer: Inducer::Wl(3),
            skipgram: SkipgramConfig::default(),
            train: TrainConfig::default(),
            mode: FeatureMode::FpDr,
            split: SplitSpec::default(),
            fp_radius: DEFAULT_RADIUS,
            fp_bits: DEFAULT_BITS,
            shuffle_labels: false,
            use_context: true,
        }
    }
}

/// Everything a run needs that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub data: TripleDataset,
    pub drugs: DrugFeatureSet,
    pub fingerprints: Vec<Fingerprint>,
    pub contexts: Option<ContextFeatureSet>,
}

impl ExperimentInputs {
    /// Builds drug features and, when `cfg.use_context` is set and no context
    /// features are given, one-hot contexts over the dataset.
    pub fn prepare(
        graphs: &[MolecularGraph],
        data: TripleDataset,
        embeddings: Option<&DrugEmbeddings>,
        contexts: Option<ContextFeatureSet>,
        cfg: &ExperimentConfig,
        exec: Exec,
    ) -> Result<Self, EvalError> {
        let (drugs, fingerprints) =
            build_drug_features(graphs, embeddings, cfg.fp_radius, cfg.fp_bits, exec)?;
        let contexts = match (cfg.use_context, contexts) {
            (false, _) => None,
            (true, Some(c)) => Some(c),
            (true, None) => Some(ContextFeatureSet::one_hot(data.contexts())),
        };
        Ok(Self {
            data,
            drugs,
            fingerprints,
            contexts,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub train_auroc: f64,
    pub test_auroc: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Cluster sizes `(|A|, |B|)` for cold splits.
    pub clusters: Option<(usize, usize)>,
}

impl RunMetrics {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("train_auroc".to_string(), self.train_auroc),
            ("test_auroc".to_string(), self.test_auroc),
        ])
    }
}

/// Same triples with labels permuted by a seeded shuffle.
pub fn shuffled_labels(data: &TripleDataset, seed: u64) -> TripleDataset {
    let mut labels = data.labels();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5348_5546));
    let mut out = data.clone();
    for (t, l) in out.triples.iter_mut().zip(labels) {
        t.label = l;
    }
    out
}

pub fn make_split(
    inputs: &ExperimentInputs,
    data: &TripleDataset,
    spec: SplitSpec,
    seed: u64,
) -> Result<SplitPlan, EvalError> {
    match spec {
        SplitSpec::Random(ratio) => random_split(data, ratio, seed),
        SplitSpec::Cold => cold_split(&inputs.fingerprints, data),
    }
}

/// Split, train and score once. The seed drives the split, label shuffling,
/// weight initialisation, minibatch order and dropout.
pub fn run_experiment(
    inputs: &ExperimentInputs,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<RunMetrics, EvalError> {
    let data = if cfg.shuffle_labels {
        Cow::Owned(shuffled_labels(&inputs.data, seed))
    } else {
        Cow::Borrowed(&inputs.data)
    };
    let plan = make_split(inputs, &data, cfg.split, seed)?;
    let contexts = inputs.contexts.as_ref().filter(|_| cfg.use_context);
    let train = encode(&data, &plan.train, &inputs.drugs, contexts, cfg.mode)?;
    let test = encode(&data, &plan.test, &inputs.drugs, contexts, cfg.mode)?;
    let mut tc = cfg.train.clone();
    tc.seed = seed;
    tc.scorer.use_context = contexts.is_some();
    let (model, _) = train_pairscore(&train, None, cfg.mode, &tc)?;
    let score = |enc: &crate::pairscore::EncodedData| -> Result<f64, EvalError> {
        let labels: Vec<u8> = enc.y.iter().map(|&y| y as u8).collect();
        auroc(&predict(&model, enc)?, &labels)
    };
    Ok(RunMetrics {
        seed,
        train_auroc: score(&train)?,
        test_auroc: score(&test)?,
        n_train: plan.train.len(),
        n_test: plan.test.len(),
        clusters: match &plan.kind {
            SplitKind::Cold { set_a, set_b } => Some((set_a.len(), set_b.len())),
            SplitKind::Random { .. } => None,
        },
    })
}
