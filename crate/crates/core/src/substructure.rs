//! Discrete substructure patterns over molecular graphs.
//!
//! Two inducers are provided:
//!
//! * **WL rooted subtrees.** Weisfeiler-Lehman relabeling where the label of a
//!   node at iteration `i` is the string `i|<own label at i-1>|[<sorted
//!   neighbour labels at i-1>]`. Labels are full recursive strings, never
//!   hashes, so two patterns are equal exactly when the rooted subtrees they
//!   describe are. Every node contributes one pattern per depth `0..=k`.
//! * **Shortest paths.** One `(min label, max label, hop length)` pattern per
//!   connected unordered node pair, with distances from Floyd-Warshall.
//!
//! [`build_vocabulary`] assigns dense ids to the union of patterns in
//! first-seen order and re-indexes each graph's multiset.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use thiserror::Error;

use crate::molgraph::MolecularGraph;
use crate::par::Exec;

/// Largest accepted WL depth. Label strings grow geometrically with depth.
pub const MAX_WL_DEPTH: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubstructureError {
    #[error("WL depth {0} exceeds the maximum of {MAX_WL_DEPTH}")]
    DepthTooLarge(u32),
    #[error("cannot build a vocabulary from an empty graph set")]
    EmptyGraphSet,
    #[error("pattern id {id} is outside a vocabulary of size {size}")]
    UnknownPatternId { id: usize, size: usize },
    #[error("invalid inducer `{0}` (expected `wl:K` or `sp`)")]
    InvalidInducer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternKind {
    Wl,
    Sp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub kind: PatternKind,
    pub canonical: String,
}

/// Which substructure patterns to induce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inducer {
    Wl(u32),
    Sp,
}

impl fmt::Display for Inducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inducer::Wl(k) => write!(f, "wl:{k}"),
            Inducer::Sp => f.write_str("sp"),
        }
    }
}

impl FromStr for Inducer {
    type Err = SubstructureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SubstructureError::InvalidInducer(s.to_string());
        match s.trim() {
            "sp" | "SP" => Ok(Inducer::Sp),
            t => {
                let k = t
                    .strip_prefix("wl:")
                    .or_else(|| t.strip_prefix("WL:"))
                    .ok_or_else(bad)?;
                let k: u32 = k.parse().map_err(|_| bad())?;
                if k > MAX_WL_DEPTH {
                    return Err(SubstructureError::DepthTooLarge(k));
                }
                Ok(Inducer::Wl(k))
            }
        }
    }
}

/// Patterns of one graph with their occurrence counts, before vocabulary
/// indexing. Iteration order is emission order; equality ignores order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternBag {
    pub kind: PatternKind,
    pub counts: IndexMap<String, u32>,
}

impl PatternBag {
    fn new(kind: PatternKind) -> Self {
        Self {
            kind,
            counts: IndexMap::new(),
        }
    }

    fn add(&mut self, canonical: String) {
        *self.counts.entry(canonical).or_insert(0) += 1;
    }

    pub fn get(&self, canonical: &str) -> u32 {
        self.counts.get(canonical).copied().unwrap_or(0)
    }

    /// Number of distinct patterns.
    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    /// Total occurrences.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// WL labels of every node at every iteration `0..=depth`; `labels[i][v]`.
///
/// Iteration-0 labels are bare atom labels; deeper labels embed the depth.
pub fn wl_labels(g: &MolecularGraph, depth: u32) -> Result<Vec<Vec<String>>, SubstructureError> {
    if depth > MAX_WL_DEPTH {
        return Err(SubstructureError::DepthTooLarge(depth));
    }
    let mut levels: Vec<Vec<String>> = Vec::with_capacity(depth as usize + 1);
    levels.push(g.nodes().iter().map(|a| a.canonical()).collect());
    for i in 1..=depth {
        let prev = levels.last().expect("level 0 present");
        let next = (0..g.node_count())
            .map(|v| {
                let mut neigh: Vec<&str> =
                    g.neighbors(v).iter().map(|&w| prev[w].as_str()).collect();
                neigh.sort_unstable();
                format!("{i}|{}|[{}]", prev[v], neigh.join(","))
            })
            .collect();
        levels.push(next);
    }
    Ok(levels)
}

/// Rooted-subtree patterns at every depth `0..=depth`.
///
/// Depth-0 patterns are written `0|<label>` so they never coincide with a
/// deeper label.
pub fn wl_patterns(g: &MolecularGraph, depth: u32) -> Result<PatternBag, SubstructureError> {
    let levels = wl_labels(g, depth)?;
    let mut bag = PatternBag::new(PatternKind::Wl);
    for (i, level) in levels.into_iter().enumerate() {
        for label in level {
            if i == 0 {
                bag.add(format!("0|{label}"));
            } else {
                bag.add(label);
            }
        }
    }
    Ok(bag)
}

/// All-pairs hop distances; `None` marks disconnected pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<Option<u32>>,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        self.data[i * self.n + j]
    }
}

/// Unit-weight Floyd-Warshall over the bond graph.
pub fn floyd_warshall(g: &MolecularGraph) -> DistanceMatrix {
    let n = g.node_count();
    const INF: u32 = u32::MAX / 2;
    let mut d = vec![INF; n * n];
    for i in 0..n {
        d[i * n + i] = 0;
    }
    for e in g.edges() {
        d[e.a * n + e.b] = 1;
        d[e.b * n + e.a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik >= INF {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    DistanceMatrix {
        n,
        data: d.into_iter().map(|x| (x < INF).then_some(x)).collect(),
    }
}

/// `(min label, max label, length)` for every connected pair `i < j`.
pub fn sp_patterns(g: &MolecularGraph) -> PatternBag {
    let dist = floyd_warshall(g);
    let labels: Vec<String> = g.nodes().iter().map(|a| a.canonical()).collect();
    let mut bag = PatternBag::new(PatternKind::Sp);
    for i in 0..g.node_count() {
        for j in i + 1..g.node_count() {
            if let Some(d) = dist.get(i, j) {
                let (lo, hi) = if labels[i] <= labels[j] {
                    (&labels[i], &labels[j])
                } else {
                    (&labels[j], &labels[i])
                };
                bag.add(format!("({lo},{hi},{d})"));
            }
        }
    }
    bag
}

pub fn induce(g: &MolecularGraph, inducer: Inducer) -> Result<PatternBag, SubstructureError> {
    match inducer {
        Inducer::Wl(k) => wl_patterns(g, k),
        Inducer::Sp => Ok(sp_patterns(g)),
    }
}

/// Dense ids for unique patterns, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternVocabulary {
    patterns: Vec<Pattern>,
    index: HashMap<Pattern, usize>,
}

impl PatternVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn get(&self, id: usize) -> Option<&Pattern> {
        self.patterns.get(id)
    }

    pub fn id_of(&self, pattern: &Pattern) -> Option<usize> {
        self.index.get(pattern).copied()
    }

    /// Id of `pattern`, inserting it at the end if new.
    pub fn intern(&mut self, pattern: Pattern) -> usize {
        if let Some(&id) = self.index.get(&pattern) {
            return id;
        }
        let id = self.patterns.len();
        self.index.insert(pattern.clone(), id);
        self.patterns.push(pattern);
        id
    }

    /// Interns every pattern of `bag` and returns its id-indexed multiset.
    pub fn absorb(&mut self, graph_id: &str, bag: &PatternBag) -> PatternMultiset {
        let mut counts = BTreeMap::new();
        for (canonical, &c) in &bag.counts {
            let id = self.intern(Pattern {
                kind: bag.kind,
                canonical: canonical.clone(),
            });
            *counts.entry(id).or_insert(0) += c;
        }
        PatternMultiset {
            graph_id: graph_id.to_string(),
            counts,
        }
    }
}

/// Occurrence counts of vocabulary ids in one graph; every count is >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMultiset {
    pub graph_id: String,
    pub counts: BTreeMap<usize, u32>,
}

impl PatternMultiset {
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }
}

/// Induces patterns on every graph (in parallel when `exec` allows) and
/// indexes them against a shared vocabulary built in graph order.
pub fn build_vocabulary(
    graphs: &[MolecularGraph],
    inducer: Inducer,
    exec: Exec,
) -> Result<(PatternVocabulary, Vec<PatternMultiset>), SubstructureError> {
    if graphs.is_empty() {
        return Err(SubstructureError::EmptyGraphSet);
    }
    let bags = exec.try_map(graphs, |g| induce(g, inducer))?;
    let mut vocab = PatternVocabulary::new();
    let multisets = graphs
        .iter()
        .zip(&bags)
        .map(|(g, bag)| vocab.absorb(g.source_id(), bag))
        .collect();
    Ok((vocab, multisets))
}

/// Dense count vector of `ms` over `vocab`.
pub fn frequency_vector(
    ms: &PatternMultiset,
    vocab: &PatternVocabulary,
) -> Result<Vec<u32>, SubstructureError> {
    let mut x = vec![0u32; vocab.len()];
    for (&id, &c) in &ms.counts {
        let slot = x.get_mut(id).ok_or(SubstructureError::UnknownPatternId {
            id,
            size: vocab.len(),
        })?;
        *slot = c;
    }
    Ok(x)
}

/// Jaccard overlap of the distinct patterns of two bags; 1.0 when both are
/// empty.
pub fn pattern_jaccard(a: &PatternBag, b: &PatternBag) -> f64 {
    let inter = a
        .counts
        .keys()
        .filter(|k| b.counts.contains_key(*k))
        .count();
    let union = a.unique() + b.unique() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
