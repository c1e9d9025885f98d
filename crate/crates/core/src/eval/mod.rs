//! Metrics, train/test splits, repeated-seed statistics and the experiment
//! drivers built on them.

mod ablation;
mod experiment;
mod split;

pub use ablation::{
    ablation_sweep, read_ablation_csv, summarize_ablation, write_ablation_csv, AblationKind,
    AblationRow, AblationSummary,
};
pub use experiment::{
    build_drug_features, embed_graphs, make_split, run_experiment, shuffled_labels, DrugEmbeddings,
    ExperimentConfig, ExperimentInputs, RunMetrics,
};
pub use split::{
    cold_split, complete_linkage, random_split, Linkage, Merge, SplitKind, SplitPlan, SplitSpec,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::par::Exec;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AUROC needs both classes among the labels")]
    SingleClass,
    #[error("scores and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("dataset too small to split ({0} triples)")]
    DatasetTooSmall(usize),
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("clustering needs at least two drugs, got {0}")]
    DegenerateClustering(usize),
    #[error("drug `{0}` has no fingerprint")]
    UnknownDrug(String),
    #[error("no seeds given")]
    NoSeeds,
    #[error("invalid split spec `{0}` (expected `random:RATIO` or `cold`)")]
    InvalidSplitSpec(String),
    #[error("malformed ablation CSV: {0}")]
    MalformedCsv(String),
    #[error("substructure stage: {0}")]
    Substructure(#[from] crate::substructure::SubstructureError),
    #[error("corpus stage: {0}")]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("embedding stage: {0}")]
    Skipgram(#[from] crate::skipgram::SkipgramError),
    #[error("fingerprint stage: {0}")]
    Fingerprint(#[from] crate::fingerprint::FingerprintError),
    #[error("pair scoring stage: {0}")]
    PairScore(#[from] crate::pairscore::PairScoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Area under the ROC curve from mid-ranks: the probability that a random
/// positive scores above a random negative, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // rank sums stay exact in f64: they are multiples of 0.5 well below 2^52
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k] != 0).count();
        pos_rank_sum += mid_rank * tied_pos as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean and sample standard deviation of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// `None` with a single run.
    pub std: Option<f64>,
    pub runs: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Summary { mean, std, runs: n }
}

/// Runs `experiment` once per seed (in parallel when `exec` allows) and
/// aggregates every named metric. Per-seed results come back in seed order.
#[allow(clippy::type_complexity)]
pub fn repeat_runs<F, E>(
    seeds: &[u64],
    exec: Exec,
    experiment: F,
) -> Result<(Vec<BTreeMap<String, f64>>, BTreeMap<String, Summary>), E>
where
    F: Fn(u64) -> Result<BTreeMap<String, f64>, E> + Sync + Send,
    E: Send + From<EvalError>,
{
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds.into());
    }
    let runs = exec.try_map(seeds, |&s| experiment(s))?;
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for run in &runs {
        for (k, v) in run {
            columns.entry(k.clone()).or_default().push(*v);
        }
    }
    let summary = columns
        .into_iter()
        .map(|(k, vs)| (k, summarize(&vs)))
        .collect();
    Ok((runs, summary))
}
