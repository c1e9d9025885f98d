//! Skipgram with negative sampling over a graph-pattern corpus.
//!
//! Each corpus occurrence `(graph, pattern)` is one training event. For an
//! event the graph row `g` is pulled towards the pattern's context row `s+`
//! and pushed away from `m` context rows drawn from the unigram table, by
//! minimising
//!
//! ```text
//! loss = -ln σ(g·s+) - Σ_j ln σ(-g·s-_j)
//! ```
//!
//! with plain SGD. Only the graph rows are exported; the context rows are
//! training state.

use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, UnigramTable};

/// Floor of the linearly decayed learning rate.
pub const MIN_LEARNING_RATE: f64 = 1e-4;

const FILE_MAGIC: &str = "graphdr-embeddings";
const FILE_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum SkipgramError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid skipgram configuration: {0}")]
    InvalidConfig(String),
    #[error("unigram table covers {table} patterns but the corpus has {corpus}")]
    TableMismatch { table: usize, corpus: usize },
    #[error("malformed embedding file: {0}")]
    MalformedEmbeddingFile(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrDecay {
    None,
    /// Linear in the global event index, from the initial rate down to
    /// [`MIN_LEARNING_RATE`].
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub lr_decay: LrDecay,
    pub seed: u64,
    pub unigram_exponent: f64,
    /// Values above 1 select unsynchronised multi-worker training, which is
    /// not deterministic.
    pub workers: usize,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            epochs: 1000,
            negatives: 10,
            learning_rate: 0.025,
            lr_decay: LrDecay::Linear,
            seed: 0,
            unigram_exponent: 1.0,
            workers: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<(), SkipgramError> {
        let bad = |m: &str| Err(SkipgramError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.unigram_exponent.is_finite() && self.unigram_exponent > 0.0) {
            return bad("unigram exponent must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

/// Graph embeddings (one row per graph) and pattern context vectors (one row
/// per vocabulary id).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub graph_matrix: Array2<f64>,
    pub pattern_matrix: Array2<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.graph_matrix.ncols()
    }

    pub fn n_graphs(&self) -> usize {
        self.graph_matrix.nrows()
    }

    pub fn graph_row(&self, i: usize) -> &[f64] {
        self.graph_matrix
            .row(i)
            .to_slice()
            .expect("standard layout")
    }

    pub fn is_finite(&self) -> bool {
        self.graph_matrix.iter().all(|x| x.is_finite())
            && self.pattern_matrix.iter().all(|x| x.is_finite())
    }
}

/// Graph rows uniform on `(-0.5/z, 0.5/z)`, pattern rows zero.
pub fn init_embeddings(
    n_graphs: usize,
    vocab_size: usize,
    dim: usize,
    seed: u64,
) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim as f64;
    let graph_matrix =
        Array2::from_shape_simple_fn((n_graphs, dim), || rng.random_range(-half..half));
    EmbeddingTable {
        graph_matrix,
        pattern_matrix: Array2::zeros((vocab_size, dim)),
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow.
#[inline]
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    -(softplus(-x))
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients of one positive occurrence with its negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub loss: f64,
    pub graph: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_loss_grad(graph: &[f64], positive: &[f64], negatives: &[&[f64]]) -> PairGrad {
    let z = graph.len();
    assert_eq!(positive.len(), z, "positive row dimension");
    let sp = dot(graph, positive);
    let cp = sigmoid(sp) - 1.0;
    let mut loss = -log_sigmoid(sp);
    let mut dg: Vec<f64> = positive.iter().map(|s| cp * s).collect();
    let dpos = graph.iter().map(|g| cp * g).collect();
    let mut dnegs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        assert_eq!(neg.len(), z, "negative row dimension");
        let sn = dot(graph, neg);
        loss -= log_sigmoid(-sn);
        let cn = sigmoid(sn);
        for (d, s) in dg.iter_mut().zip(neg.iter()) {
            *d += cn * s;
        }
        dnegs.push(graph.iter().map(|g| cn * g).collect());
    }
    PairGrad {
        loss,
        graph: dg,
        positive: dpos,
        negatives: dnegs,
    }
}

/// Reusable buffers for [`sgd_event`].
struct Scratch {
    graph: Vec<f64>,
    grad: Vec<f64>,
    coeff: Vec<f64>,
    negatives: Vec<usize>,
}

impl Scratch {
    fn new(dim: usize, m: usize) -> Self {
        Self {
            graph: vec![0.0; dim],
            grad: vec![0.0; dim],
            coeff: vec![0.0; m + 1],
            negatives: vec![0; m],
        }
    }
}

/// Applies one SGD step in place. All gradients are evaluated at the
/// pre-step parameters, matching [`pair_loss_grad`].
fn sgd_event(
    table: &mut EmbeddingTable,
    graph: usize,
    positive: usize,
    scratch: &mut Scratch,
    lr: f64,
) -> f64 {
    let Scratch {
        graph: g,
        grad,
        coeff,
        negatives,
    } = scratch;
    g.copy_from_slice(table.graph_row(graph));
    grad.iter_mut().for_each(|x| *x = 0.0);

    let pm = &mut table.pattern_matrix;
    let contexts = std::iter::once(positive).chain(negatives.iter().copied());
    let mut loss = 0.0;
    for (k, p) in contexts.enumerate() {
        let row = pm.row(p);
        let row = row.to_slice().expect("standard layout");
        let score = dot(g, row);
        let c = if k == 0 {
            loss -= log_sigmoid(score);
            sigmoid(score) - 1.0
        } else {
            loss -= log_sigmoid(-score);
            sigmoid(score)
        };
        coeff[k] = c;
        for (d, s) in grad.iter_mut().zip(row) {
            *d += c * s;
        }
    }
    let contexts = std::iter::once(positive).chain(negatives.iter().copied());
    for (k, p) in contexts.enumerate() {
        let step = lr * coeff[k];
        let mut row = pm.row_mut(p);
        for (s, gv) in row.iter_mut().zip(g.iter()) {
            *s -= step * gv;
        }
    }
    let mut grow = table.graph_matrix.row_mut(graph);
    for (x, d) in grow.iter_mut().zip(grad.iter()) {
        *x -= lr * d;
    }
    loss
}

/// Trained embeddings plus the mean per-event loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub table: EmbeddingTable,
    pub loss_history: Vec<f64>,
    pub events_per_epoch: usize,
}

fn expand_events(corpus: &Corpus) -> Vec<(u32, u32)> {
    corpus
        .entries()
        .iter()
        .flat_map(|e| {
            std::iter::repeat_n((e.graph as u32, e.pattern as u32), e.multiplicity as usize)
        })
        .collect()
}

fn learning_rate(cfg: &SkipgramConfig, done: usize, total: usize) -> f64 {
    match cfg.lr_decay {
        LrDecay::None => cfg.learning_rate,
        LrDecay::Linear => {
            let frac = done as f64 / total as f64;
            (cfg.learning_rate - (cfg.learning_rate - MIN_LEARNING_RATE) * frac)
                .max(MIN_LEARNING_RATE)
        }
    }
}

/// Trains graph embeddings on `corpus`.
///
/// With `workers == 1` (the default) the run is bit-reproducible per seed.
pub fn train(
    corpus: &Corpus,
    table: &UnigramTable,
    cfg: &SkipgramConfig,
) -> Result<TrainOutput, SkipgramError> {
    cfg.validate()?;
    if corpus.entries().is_empty() {
        return Err(CorpusError::EmptyCorpus.into());
    }
    if table.probs().len() != corpus.vocab_size() {
        return Err(SkipgramError::TableMismatch {
            table: table.probs().len(),
            corpus: corpus.vocab_size(),
        });
    }
    let emb = init_embeddings(corpus.n_graphs(), corpus.vocab_size(), cfg.dim, cfg.seed);
    if cfg.workers > 1 && cfg!(feature = "parallel") {
        #[cfg(feature = "parallel")]
        return Ok(hogwild::train(corpus, table, cfg, emb));
    }
    Ok(train_sequential(corpus, table, cfg, emb))
}

fn train_sequential(
    corpus: &Corpus,
    unigram: &UnigramTable,
    cfg: &SkipgramConfig,
    mut emb: EmbeddingTable,
) -> TrainOutput {
    // separate stream from initialisation
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut events = expand_events(corpus);
    let total = events.len() * cfg.epochs;
    let mut scratch = Scratch::new(cfg.dim, cfg.negatives);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut done = 0usize;
    for _ in 0..cfg.epochs {
        events.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &(g, p) in &events {
            for n in scratch.negatives.iter_mut() {
                *n = unigram.sample(&mut rng);
            }
            let lr = learning_rate(cfg, done, total);
            epoch_loss += sgd_event(&mut emb, g as usize, p as usize, &mut scratch, lr);
            done += 1;
        }
        history.push(epoch_loss / events.len() as f64);
    }
    TrainOutput {
        table: emb,
        loss_history: history,
        events_per_epoch: events.len(),
    }
}

#[cfg(feature = "parallel")]
mod hogwild {
    //! Lock-free multi-worker training. Rows are shared as relaxed atomics;
    //! concurrent read-modify-write cycles may lose updates.

    use std::sync::atomic::{AtomicU64, Ordering};

    use rayon::prelude::*;

    use super::*;

    struct SharedMatrix {
        cols: usize,
        data: Vec<AtomicU64>,
    }

    impl SharedMatrix {
        fn from_array(a: &Array2<f64>) -> Self {
            Self {
                cols: a.ncols(),
                data: a.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            }
        }

        fn load_row(&self, r: usize, out: &mut [f64]) {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o = f64::from_bits(a.load(Ordering::Relaxed));
            }
        }

        fn axpy_row(&self, r: usize, alpha: f64, x: &[f64]) {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (a, xv) in row.iter().zip(x) {
                let cur = f64::from_bits(a.load(Ordering::Relaxed));
                a.store((cur + alpha * xv).to_bits(), Ordering::Relaxed);
            }
        }

        fn into_array(self, rows: usize) -> Array2<f64> {
            let v = self
                .data
                .into_iter()
                .map(|a| f64::from_bits(a.into_inner()))
                .collect();
            Array2::from_shape_vec((rows, self.cols), v).expect("shape preserved")
        }
    }

    pub(super) fn train(
        corpus: &Corpus,
        unigram: &UnigramTable,
        cfg: &SkipgramConfig,
        emb: EmbeddingTable,
    ) -> TrainOutput {
        let n_graphs = emb.graph_matrix.nrows();
        let n_patterns = emb.pattern_matrix.nrows();
        let graphs = SharedMatrix::from_array(&emb.graph_matrix);
        let patterns = SharedMatrix::from_array(&emb.pattern_matrix);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut events = expand_events(corpus);
        let total = events.len() * cfg.epochs;
        let chunk = events.len().div_ceil(cfg.workers);
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            events.shuffle(&mut rng);
            let base = epoch * events.len();
            let loss: f64 = events
                .par_chunks(chunk)
                .enumerate()
                .map(|(w, shard)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        cfg.seed ^ ((epoch as u64) << 20) ^ (w as u64 + 1),
                    );
                    let z = cfg.dim;
                    let (mut g, mut grad, mut row) = (vec![0.0; z], vec![0.0; z], vec![0.0; z]);
                    let mut ctx = vec![(0usize, 0.0f64); cfg.negatives + 1];
                    let mut loss = 0.0;
                    for (i, &(gi, pi)) in shard.iter().enumerate() {
                        let lr = learning_rate(cfg, base + w * chunk + i, total);
                        graphs.load_row(gi as usize, &mut g);
                        grad.iter_mut().for_each(|x| *x = 0.0);
                        for (k, c) in ctx.iter_mut().enumerate() {
                            let p = if k == 0 {
                                pi as usize
                            } else {
                                unigram.sample(&mut rng)
                            };
                            patterns.load_row(p, &mut row);
                            let score = dot(&g, &row);
                            let coeff = if k == 0 {
                                loss -= log_sigmoid(score);
                                sigmoid(score) - 1.0
                            } else {
                                loss -= log_sigmoid(-score);
                                sigmoid(score)
                            };
                            for (d, s) in grad.iter_mut().zip(&row) {
                                *d += coeff * s;
                            }
                            *c = (p, coeff);
                        }
                        for &(p, coeff) in &ctx {
                            patterns.axpy_row(p, -lr * coeff, &g);
                        }
                        graphs.axpy_row(gi as usize, -lr, &grad);
                    }
                    loss
                })
                .sum();
            history.push(loss / events.len() as f64);
        }
        TrainOutput {
            table: EmbeddingTable {
                graph_matrix: graphs.into_array(n_graphs),
                pattern_matrix: patterns.into_array(n_patterns),
            },
            loss_history: history,
            events_per_epoch: events.len(),
        }
    }
}

/// Writes the graph rows of `matrix` in the v1 text format.
pub fn export_embeddings<W: Write>(
    mut out: W,
    ids: &[String],
    matrix: &Array2<f64>,
    inducer_tag: &str,
) -> Result<(), SkipgramError> {
    if ids.len() != matrix.nrows() {
        return Err(SkipgramError::DimensionMismatch(format!(
            "{} ids for {} rows",
            ids.len(),
            matrix.nrows()
        )));
    }
    if inducer_tag.is_empty() || inducer_tag.contains(char::is_whitespace) {
        return Err(SkipgramError::MalformedEmbeddingFile(format!(
            "invalid inducer tag `{inducer_tag}`"
        )));
    }
    writeln!(
        out,
        "{FILE_MAGIC} {FILE_VERSION} {} {} {inducer_tag}",
        matrix.nrows(),
        matrix.ncols()
    )?;
    for (id, row) in ids.iter().zip(matrix.rows()) {
        if id.is_empty() || id.contains(['\t', '\n', '\r']) {
            return Err(SkipgramError::MalformedEmbeddingFile(format!(
                "invalid drug id `{id}`"
            )));
        }
        write!(out, "{id}\t")?;
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.write_all(b" ")?;
            }
            write!(out, "{v:.16e}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedEmbeddings {
    pub ids: Vec<String>,
    pub matrix: Array2<f64>,
    pub inducer_tag: String,
}

impl ImportedEmbeddings {
    pub fn row_of(&self, id: &str) -> Option<&[f64]> {
        let i = self.ids.iter().position(|x| x == id)?;
        self.matrix.row(i).to_slice()
    }
}

pub fn import_embeddings<R: BufRead>(input: R) -> Result<ImportedEmbeddings, SkipgramError> {
    let malformed = |m: String| SkipgramError::MalformedEmbeddingFile(m);
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed("missing header".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, version, n, z, tag] = fields[..] else {
        return Err(malformed(format!("bad header `{header}`")));
    };
    if magic != FILE_MAGIC || version != FILE_VERSION {
        return Err(malformed(format!("unsupported header `{header}`")));
    }
    let n: usize = n
        .parse()
        .map_err(|_| malformed(format!("bad row count `{n}`")))?;
    let z: usize = z
        .parse()
        .map_err(|_| malformed(format!("bad dimension `{z}`")))?;
    if n == 0 || z == 0 {
        return Err(malformed("empty id list or zero dimension".into()));
    }
    let mut ids = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * z);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| malformed(format!("line {lineno}: missing tab")))?;
        let row: Vec<f64> = rest
            .split(' ')
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| malformed(format!("line {lineno}: bad value `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != z {
            return Err(SkipgramError::DimensionMismatch(format!(
                "line {lineno}: {} values, header says {z}",
                row.len()
            )));
        }
        ids.push(id.to_string());
        values.extend(row);
    }
    if ids.len() != n {
        return Err(malformed(format!("{} rows, header says {n}", ids.len())));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(malformed(format!("duplicate drug id `{dup}`")));
    }
    Ok(ImportedEmbeddings {
        ids,
        matrix: Array2::from_shape_vec((n, z), values).expect("row widths checked"),
        inducer_tag: tag.to_string(),
    })
}
