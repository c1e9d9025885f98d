//! Synthetic drugs and triples with a planted structure-driven label rule.
//!
//! Drugs are random tree+ring SMILES over C, N, O and S, each assembled from
//! three fragments drawn from a small shared pool, so pattern overlap between
//! two drugs ranges from none to nearly all. A triple `(a, b, c)` is positive with probability
//! `sigmoid(slope * J(a, b) + offset_c)` where `J` is the Jaccard overlap of
//! the two drugs' depth-3 WL patterns and `offset_c` is uniform on [-3, 0].

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::molgraph::{parse_smiles, DrugRecord};
use crate::pairscore::{Triple, TripleDataset};
use crate::skipgram::sigmoid;
use crate::substructure::{pattern_jaccard, wl_patterns, PatternBag};

pub const MIN_DRUGS: usize = 10;
const JACCARD_DEPTH: u32 = 3;
const FRAGMENTS_PER_DRUG: usize = 3;
const FRAGMENT_POOL: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("need at least {MIN_DRUGS} drugs, got {0}")]
    TooFewDrugs(usize),
    #[error("need at least one context")]
    NoContexts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_drugs: usize,
    pub n_contexts: usize,
    pub n_triples: usize,
    pub seed: u64,
    pub slope: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_drugs: 200,
            n_contexts: 5,
            n_triples: 20_000,
            seed: 0,
            slope: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub drugs: Vec<DrugRecord>,
    pub triples: TripleDataset,
    /// Per-context logit offsets, indexed like the context ids `ctx0..`.
    pub offsets: Vec<f64>,
}

impl SynthData {
    pub fn write_drugs<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.drugs {
            writeln!(out, "{}\t{}", d.id, d.smiles)?;
        }
        out.flush()
    }

    pub fn drug_file_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_drugs(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

fn atom<R: Rng>(rng: &mut R) -> &'static str {
    match rng.random_range(0..20) {
        0..12 => "C",
        12..15 => "N",
        15..18 => "O",
        _ => "S",
    }
}

fn ring<R: Rng>(rng: &mut R, out: &mut String) {
    let size = rng.random_range(5..=6);
    // aromatic six-rings of carbon, otherwise saturated with heteroatoms
    if size == 6 && rng.random_bool(0.5) {
        out.push_str("c1ccccc1");
        return;
    }
    for i in 0..size {
        out.push_str(atom(rng));
        if i == 0 || i == size - 1 {
            out.push('1');
        }
    }
}

fn chain<R: Rng>(rng: &mut R, depth: u32, out: &mut String) {
    let len = rng.random_range(1..=4);
    for _ in 0..len {
        if rng.random_bool(0.2) {
            ring(rng, out);
        } else {
            out.push_str(atom(rng));
            if depth < 2 && rng.random_bool(0.25) {
                out.push('(');
                chain(rng, depth + 1, out);
                out.push(')');
            }
        }
    }
}

fn fragment<R: Rng>(rng: &mut R) -> String {
    let mut s = String::new();
    ring(rng, &mut s);
    chain(rng, 1, &mut s);
    s
}

/// Random molecule: `FRAGMENTS_PER_DRUG` pool fragments joined by single
/// random linker atoms.
fn molecule<R: Rng>(rng: &mut R, pool: &[String]) -> String {
    let mut s = String::new();
    for i in 0..FRAGMENTS_PER_DRUG {
        if i > 0 {
            s.push_str(atom(rng));
        }
        s.push_str(&pool[rng.random_range(0..pool.len())]);
    }
    s
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    if cfg.n_drugs < MIN_DRUGS {
        return Err(SynthError::TooFewDrugs(cfg.n_drugs));
    }
    if cfg.n_contexts == 0 {
        return Err(SynthError::NoContexts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool: Vec<String> = (0..FRAGMENT_POOL).map(|_| fragment(&mut rng)).collect();
    let width = (cfg.n_drugs - 1).to_string().len();
    let drugs: Vec<DrugRecord> = (0..cfg.n_drugs)
        .map(|i| DrugRecord {
            line: i + 1,
            id: format!("D{i:0width$}"),
            smiles: molecule(&mut rng, &pool),
        })
        .collect();
    let bags: Vec<PatternBag> = drugs
        .iter()
        .map(|d| {
            let g = parse_smiles(&d.id, &d.smiles).expect("generator emits valid SMILES");
            wl_patterns(&g, JACCARD_DEPTH).expect("depth within limit")
        })
        .collect();
    let offsets: Vec<f64> = (0..cfg.n_contexts)
        .map(|_| rng.random_range(-3.0..=0.0))
        .collect();
    let triples = (0..cfg.n_triples)
        .map(|_| {
            let a = rng.random_range(0..cfg.n_drugs);
            let b = loop {
                let b = rng.random_range(0..cfg.n_drugs);
                if b != a {
                    break b;
                }
            };
            let c = rng.random_range(0..cfg.n_contexts);
            let p = sigmoid(cfg.slope * pattern_jaccard(&bags[a], &bags[b]) + offsets[c]);
            Triple {
                drug_a: drugs[a].id.clone(),
                drug_b: drugs[b].id.clone(),
                context: format!("ctx{c}"),
                label: u8::from(rng.random_bool(p)),
            }
        })
        .collect();
    Ok(SynthData {
        drugs,
        triples: TripleDataset::new(triples),
        offsets,
    })
}
