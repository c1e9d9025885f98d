//! Folded circular fingerprints and Tanimoto similarity.
//!
//! Circular atom environments are the WL rooted-subtree patterns up to the
//! fingerprint radius. Each pattern string is hashed with 64-bit FNV-1a and
//! folded onto `n_bits` positions. This approximates ECFP; the bits are not
//! those of any particular cheminformatics toolkit.

use thiserror::Error;

use crate::molgraph::MolecularGraph;
use crate::substructure::wl_patterns;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_BITS: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("fingerprint length must be a power of two, got {0}")]
    InvalidLength(usize),
    #[error("radius {0} is too large")]
    InvalidRadius(u32),
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    pub drug_id: String,
    pub radius: u32,
    n_bits: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn empty(
        drug_id: impl Into<String>,
        radius: u32,
        n_bits: usize,
    ) -> Result<Self, FingerprintError> {
        if n_bits == 0 || !n_bits.is_power_of_two() {
            return Err(FingerprintError::InvalidLength(n_bits));
        }
        Ok(Self {
            drug_id: drug_id.into(),
            radius,
            n_bits,
            words: vec![0; n_bits.div_ceil(64)],
        })
    }

    pub fn from_bits(
        drug_id: impl Into<String>,
        n_bits: usize,
        set: impl IntoIterator<Item = usize>,
    ) -> Result<Self, FingerprintError> {
        let mut fp = Self::empty(drug_id, 0, n_bits)?;
        for b in set {
            fp.set(b % n_bits);
        }
        Ok(fp)
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.n_bits, "bit out of range");
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(|&b| self.get(b))
    }

    /// Bits as a 0/1 real vector.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.n_bits)
            .map(|b| if self.get(b) { 1.0 } else { 0.0 })
            .collect()
    }

    /// `0`/`1` characters, bit 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.n_bits)
            .map(|b| if self.get(b) { '1' } else { '0' })
            .collect()
    }
}

pub fn morgan_fingerprint(
    g: &MolecularGraph,
    radius: u32,
    n_bits: usize,
) -> Result<Fingerprint, FingerprintError> {
    let mut fp = Fingerprint::empty(g.source_id(), radius, n_bits)?;
    let bag = wl_patterns(g, radius).map_err(|_| FingerprintError::InvalidRadius(radius))?;
    for pattern in bag.counts.keys() {
        fp.set((fnv1a64(pattern.as_bytes()) % n_bits as u64) as usize);
    }
    Ok(fp)
}

/// `|a ∧ b| / |a ∨ b|`, with 1.0 for two empty fingerprints.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.n_bits != b.n_bits {
        return Err(FingerprintError::LengthMismatch(a.n_bits, b.n_bits));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 {
        1.0
    } else {
        f64::from(inter) / f64::from(union)
    })
}
