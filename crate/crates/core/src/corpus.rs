//! Graph-pattern target-context corpus and the unigram negative-sampling
//! distribution.

use rand::Rng;
use thiserror::Error;

use crate::substructure::{PatternMultiset, PatternVocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("corpus is empty: no graph produced any pattern")]
    EmptyCorpus,
    #[error("pattern id {id} is outside a vocabulary of size {size}")]
    UnknownPatternId { id: usize, size: usize },
    #[error("unigram exponent must be positive and finite, got {0}")]
    InvalidExponent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    pub graph: usize,
    pub pattern: usize,
    pub multiplicity: u32,
}

/// Distinct `(graph, pattern)` pairs with their occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    n_graphs: usize,
    vocab_size: usize,
}

impl Corpus {
    /// Builds a corpus directly from entries; used by tests and planted
    /// experiments that bypass pattern induction.
    pub fn from_entries(
        entries: Vec<CorpusEntry>,
        n_graphs: usize,
        vocab_size: usize,
    ) -> Result<Self, CorpusError> {
        if entries.iter().all(|e| e.multiplicity == 0) {
            return Err(CorpusError::EmptyCorpus);
        }
        if let Some(e) = entries.iter().find(|e| e.pattern >= vocab_size) {
            return Err(CorpusError::UnknownPatternId {
                id: e.pattern,
                size: vocab_size,
            });
        }
        let entries = entries.into_iter().filter(|e| e.multiplicity > 0).collect();
        Ok(Self {
            entries,
            n_graphs,
            vocab_size,
        })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn n_graphs(&self) -> usize {
        self.n_graphs
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// |R|: total pattern occurrences.
    pub fn total_occurrences(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.multiplicity)).sum()
    }

    /// Occurrences of each pattern summed over graphs.
    pub fn pattern_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab_size];
        for e in &self.entries {
            counts[e.pattern] += u64::from(e.multiplicity);
        }
        counts
    }

    /// Count vector of one graph over the vocabulary.
    pub fn graph_vector(&self, graph: usize) -> Vec<u32> {
        let mut x = vec![0u32; self.vocab_size];
        for e in self.entries.iter().filter(|e| e.graph == graph) {
            x[e.pattern] += e.multiplicity;
        }
        x
    }
}

/// One entry per distinct (graph, pattern); graph indices follow `multisets`.
pub fn build_corpus(
    multisets: &[PatternMultiset],
    vocab: &PatternVocabulary,
) -> Result<Corpus, CorpusError> {
    let mut entries = Vec::new();
    for (graph, ms) in multisets.iter().enumerate() {
        for (&pattern, &multiplicity) in &ms.counts {
            if pattern >= vocab.len() {
                return Err(CorpusError::UnknownPatternId {
                    id: pattern,
                    size: vocab.len(),
                });
            }
            if multiplicity > 0 {
                entries.push(CorpusEntry {
                    graph,
                    pattern,
                    multiplicity,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus {
        entries,
        n_graphs: multisets.len(),
        vocab_size: vocab.len(),
    })
}

/// Sampling distribution over pattern ids, proportional to
/// `count(p)^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramTable {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    exponent: f64,
}

impl UnigramTable {
    pub fn from_counts(counts: &[u64], exponent: f64) -> Result<Self, CorpusError> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(CorpusError::InvalidExponent(exponent));
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    0.0
                } else {
                    (c as f64).powf(exponent)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            return Err(CorpusError::EmptyCorpus);
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        // pin the last nonzero bucket to exactly 1 so u in [0,1) always lands
        if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
            for c in &mut cumulative[last..] {
                *c = 1.0;
            }
        }
        Ok(Self {
            probs,
            cumulative,
            exponent,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u)
    }
}

pub fn unigram_distribution(corpus: &Corpus, exponent: f64) -> Result<UnigramTable, CorpusError> {
    UnigramTable::from_counts(&corpus.pattern_counts(), exponent)
}

/// `m` i.i.d. draws; repeats allowed and no filtering against the target
/// graph's own patterns.
pub fn sample_negatives<R: Rng + ?Sized>(
    table: &UnigramTable,
    rng: &mut R,
    m: usize,
) -> Vec<usize> {
    (0..m).map(|_| table.sample(rng)).collect()
}
