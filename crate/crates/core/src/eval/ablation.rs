use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::experiment::{embed_graphs, run_experiment, ExperimentConfig, ExperimentInputs};
use super::{summarize, EvalError};
use crate::molgraph::MolecularGraph;
use crate::pairscore::{ContextFeatureSet, TripleDataset};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationKind {
    /// Embedding dimension 8, 16, ..., 1024.
    Dimension,
    /// Skipgram epochs 200, 400, ..., 2000.
    Epochs,
}

impl AblationKind {
    pub fn settings(self) -> Vec<usize> {
        match self {
            AblationKind::Dimension => (3..=10).map(|p| 1 << p).collect(),
            AblationKind::Epochs => (1..=10).map(|i| i * 200).collect(),
        }
    }

    fn apply(self, base: &ExperimentConfig, setting: usize) -> ExperimentConfig {
        let mut cfg = base.clone();
        match self {
            AblationKind::Dimension => cfg.skipgram.dim = setting,
            AblationKind::Epochs => cfg.skipgram.epochs = setting,
        }
        cfg
    }
}

impl fmt::Display for AblationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationKind::Dimension => "dimension",
            AblationKind::Epochs => "epochs",
        })
    }
}

impl FromStr for AblationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dimension" | "dim" => Ok(AblationKind::Dimension),
            "epochs" => Ok(AblationKind::Epochs),
            _ => Err(format!(
                "unknown ablation `{s}` (expected dimension or epochs)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub setting: usize,
    pub seed: u64,
    pub test_auroc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationSummary {
    pub setting: usize,
    pub mean: f64,
    pub std: Option<f64>,
    pub runs: usize,
}

/// Runs every `(setting, seed)` pair of the sweep; rows come back grouped by
/// setting, seeds in the given order.
///
/// Embeddings are trained once per setting with `base.skipgram.seed`; the
/// run seed drives the split and the scorer.
pub fn ablation_sweep(
    kind: AblationKind,
    base: &ExperimentConfig,
    graphs: &[MolecularGraph],
    data: &TripleDataset,
    contexts: Option<&ContextFeatureSet>,
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<AblationRow>, EvalError> {
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let settings = kind.settings();
    let configs: Vec<ExperimentConfig> = settings.iter().map(|&s| kind.apply(base, s)).collect();
    // graph-level work inside each setting stays sequential; settings fan out
    let inputs = exec.try_map(&configs, |cfg| -> Result<ExperimentInputs, EvalError> {
        let emb = embed_graphs(graphs, cfg.inducer, &cfg.skipgram, Exec::Sequential)?;
        ExperimentInputs::prepare(
            graphs,
            data.clone(),
            Some(&emb),
            contexts.cloned(),
            cfg,
            Exec::Sequential,
        )
    })?;
    let jobs: Vec<(usize, u64)> = (0..settings.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    exec.try_map(&jobs, |&(i, seed)| {
        let m = run_experiment(&inputs[i], &configs[i], seed)?;
        Ok(AblationRow {
            setting: settings[i],
            seed,
            test_auroc: m.test_auroc,
        })
    })
}

/// Mean and sample std per setting, in order of first appearance.
pub fn summarize_ablation(rows: &[AblationRow]) -> Vec<AblationSummary> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let g = groups.entry(r.setting).or_default();
        if g.is_empty() {
            order.push(r.setting);
        }
        g.push(r.test_auroc);
    }
    order
        .into_iter()
        .map(|setting| {
            let s = summarize(&groups[&setting]);
            AblationSummary {
                setting,
                mean: s.mean,
                std: s.std,
                runs: s.runs,
            }
        })
        .collect()
}

const HEADER: [&str; 3] = ["setting", "seed", "test_auroc"];

pub fn write_ablation_csv<W: Write>(out: W, rows: &[AblationRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.setting.to_string(),
            r.seed.to_string(),
            format!("{:.17e}", r.test_auroc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ablation_csv<R: Read>(input: R) -> Result<Vec<AblationRow>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    if rdr.headers()?.iter().ne(HEADER) {
        return Err(EvalError::MalformedCsv(format!(
            "expected header `{}`",
            HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || EvalError::MalformedCsv(format!("data row {}", i + 1));
        let field = |k: usize| rec.get(k).ok_or_else(bad);
        rows.push(AblationRow {
            setting: field(0)?.parse().map_err(|_| bad())?,
            seed: field(1)?.parse().map_err(|_| bad())?,
            test_auroc: field(2)?.parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
