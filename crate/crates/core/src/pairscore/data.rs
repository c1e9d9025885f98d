use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2};

use super::PairScoreError;
use crate::fingerprint::Fingerprint;

/// Which drug features feed the drug encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Fingerprint bits only.
    Fp,
    /// Distributed representation only.
    Dr,
    /// Fingerprint bits followed by the distributed representation.
    FpDr,
}

impl FeatureMode {
    pub fn uses_fingerprint(self) -> bool {
        matches!(self, FeatureMode::Fp | FeatureMode::FpDr)
    }

    pub fn uses_embedding(self) -> bool {
        matches!(self, FeatureMode::Dr | FeatureMode::FpDr)
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Fp => "fp",
            FeatureMode::Dr => "dr",
            FeatureMode::FpDr => "fp+dr",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = PairScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp" => Ok(FeatureMode::Fp),
            "dr" => Ok(FeatureMode::Dr),
            "fp+dr" | "fpdr" => Ok(FeatureMode::FpDr),
            _ => Err(PairScoreError::InvalidConfig(format!(
                "unknown feature mode `{s}` (expected fp, dr or fp+dr)"
            ))),
        }
    }
}

/// Per-drug fingerprint vectors and optional embeddings.
#[derive(Debug, Clone, Default)]
pub struct DrugFeatureSet {
    fingerprints: HashMap<String, Vec<f64>>,
    embeddings: HashMap<String, Vec<f64>>,
    fp_dim: Option<usize>,
    emb_dim: Option<usize>,
}

impl DrugFeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fingerprints(fps: &[Fingerprint]) -> Result<Self, PairScoreError> {
        let mut s = Self::new();
        for fp in fps {
            s.insert_fingerprint(&fp.drug_id, fp.to_f64())?;
        }
        Ok(s)
    }

    pub fn insert_fingerprint(&mut self, id: &str, x: Vec<f64>) -> Result<(), PairScoreError> {
        check_dim(&mut self.fp_dim, x.len(), "fingerprint")?;
        self.fingerprints.insert(id.to_string(), x);
        Ok(())
    }

    pub fn insert_embedding(&mut self, id: &str, x: Vec<f64>) -> Result<(), PairScoreError> {
        check_dim(&mut self.emb_dim, x.len(), "embedding")?;
        self.embeddings.insert(id.to_string(), x);
        Ok(())
    }

    pub fn fingerprint_dim(&self) -> Option<usize> {
        self.fp_dim
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.emb_dim
    }

    pub fn contains(&self, id: &str) -> bool {
        self.fingerprints.contains_key(id) || self.embeddings.contains_key(id)
    }

    pub fn input_dim(&self, mode: FeatureMode) -> Result<usize, PairScoreError> {
        let fp = || {
            self.fp_dim
                .ok_or_else(|| PairScoreError::InvalidConfig("no fingerprints loaded".into()))
        };
        let emb = || {
            self.emb_dim
                .ok_or_else(|| PairScoreError::InvalidConfig("no embeddings loaded".into()))
        };
        Ok(match mode {
            FeatureMode::Fp => fp()?,
            FeatureMode::Dr => emb()?,
            FeatureMode::FpDr => fp()? + emb()?,
        })
    }

    /// Feature vector of one drug under `mode`, written into `out`.
    pub fn write_drug(
        &self,
        id: &str,
        mode: FeatureMode,
        out: &mut [f64],
    ) -> Result<(), PairScoreError> {
        if !self.contains(id) {
            return Err(PairScoreError::UnknownDrug(id.to_string()));
        }
        let mut offset = 0;
        if mode.uses_fingerprint() {
            let x = self
                .fingerprints
                .get(id)
                .ok_or_else(|| PairScoreError::MissingFingerprint(id.to_string()))?;
            out[..x.len()].copy_from_slice(x);
            offset = x.len();
        }
        if mode.uses_embedding() {
            let x = self
                .embeddings
                .get(id)
                .ok_or_else(|| PairScoreError::MissingEmbedding(id.to_string()))?;
            out[offset..offset + x.len()].copy_from_slice(x);
        }
        Ok(())
    }

    pub fn drug_vector(&self, id: &str, mode: FeatureMode) -> Result<Vec<f64>, PairScoreError> {
        let mut v = vec![0.0; self.input_dim(mode)?];
        self.write_drug(id, mode, &mut v)?;
        Ok(v)
    }
}

fn check_dim(slot: &mut Option<usize>, len: usize, what: &str) -> Result<(), PairScoreError> {
    match *slot {
        Some(d) if d != len => Err(PairScoreError::ShapeMismatch(format!(
            "{what} of length {len}, expected {d}"
        ))),
        _ => {
            *slot = Some(len);
            Ok(())
        }
    }
}

/// Context feature vectors of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextFeatureSet {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    features: Array2<f64>,
}

impl ContextFeatureSet {
    pub fn new(ids: Vec<String>, features: Array2<f64>) -> Result<Self, PairScoreError> {
        if ids.len() != features.nrows() {
            return Err(PairScoreError::ShapeMismatch(format!(
                "{} context ids for {} feature rows",
                ids.len(),
                features.nrows()
            )));
        }
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(PairScoreError::InvalidConfig(format!(
                    "duplicate context `{id}`"
                )));
            }
        }
        Ok(Self {
            ids,
            index,
            features,
        })
    }

    /// One-hot encoding over the distinct ids, ordered lexicographically.
    pub fn one_hot<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = ids
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let features =
            Array2::from_shape_fn(
                (ids.len(), ids.len()),
                |(i, j)| {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                },
            );
        Self::new(ids, features).expect("distinct ids")
    }

    /// Reads `context,<f1>,...,<fm>` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, PairScoreError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("context") || header.len() < 2 {
            return Err(PairScoreError::Parse {
                line: 1,
                message: "expected header `context,<f1>,...`".into(),
            });
        }
        let dim = header.len() - 1;
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            ids.push(rec[0].to_string());
            for field in rec.iter().skip(1) {
                values.push(field.parse::<f64>().map_err(|_| PairScoreError::Parse {
                    line,
                    message: format!("bad feature value `{field}`"),
                })?);
            }
        }
        let features = Array2::from_shape_vec((ids.len(), dim), values)
            .map_err(|e| PairScoreError::ShapeMismatch(e.to_string()))?;
        Self::new(ids, features)
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Result<&[f64], PairScoreError> {
        let i = self
            .index
            .get(id)
            .ok_or_else(|| PairScoreError::UnknownContext(id.to_string()))?;
        Ok(self.features.row(*i).to_slice().expect("standard layout"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub drug_a: String,
    pub drug_b: String,
    pub context: String,
    pub label: u8,
}

/// Labeled drug-pair-context observations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleDataset {
    pub triples: Vec<Triple>,
}

pub const TRIPLE_HEADER: [&str; 4] = ["drug_a", "drug_b", "context", "label"];

impl TripleDataset {
    pub fn new(triples: Vec<Triple>) -> Self {
        Self { triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.triples.iter().map(|t| t.label).collect()
    }

    /// Distinct context ids, sorted.
    pub fn contexts(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.triples.iter().map(|t| t.context.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Distinct drug ids, sorted.
    pub fn drugs(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .triples
            .iter()
            .flat_map(|t| [t.drug_a.as_str(), t.drug_b.as_str()])
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| self.triples[i].clone()).collect())
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, PairScoreError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(TRIPLE_HEADER.iter().copied()) {
            return Err(PairScoreError::Parse {
                line: 1,
                message: format!("expected header `{}`", TRIPLE_HEADER.join(",")),
            });
        }
        let mut triples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let label = match &rec[3] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(PairScoreError::Parse {
                        line,
                        message: format!("label must be 0 or 1, got `{other}`"),
                    })
                }
            };
            if rec[0].is_empty() || rec[1].is_empty() || rec[2].is_empty() {
                return Err(PairScoreError::Parse {
                    line,
                    message: "empty id".into(),
                });
            }
            triples.push(Triple {
                drug_a: rec[0].to_string(),
                drug_b: rec[1].to_string(),
                context: rec[2].to_string(),
                label,
            });
        }
        Ok(Self::new(triples))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PairScoreError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRIPLE_HEADER)?;
        for t in &self.triples {
            w.write_record([
                t.drug_a.as_str(),
                t.drug_b.as_str(),
                t.context.as_str(),
                if t.label == 1 { "1" } else { "0" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

type InputRow = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Model inputs for one triple: `(xa, xb, xc)`. `xc` is empty when context
/// features are disabled.
pub fn assemble_input(
    triple: &Triple,
    drugs: &DrugFeatureSet,
    contexts: Option<&ContextFeatureSet>,
    mode: FeatureMode,
) -> Result<InputRow, PairScoreError> {
    let xa = drugs.drug_vector(&triple.drug_a, mode)?;
    let xb = drugs.drug_vector(&triple.drug_b, mode)?;
    let xc = match contexts {
        Some(c) => c.get(&triple.context)?.to_vec(),
        None => Vec::new(),
    };
    Ok((xa, xb, xc))
}

/// Stacked model inputs and labels for a set of triples.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedData {
    pub xa: Array2<f64>,
    pub xb: Array2<f64>,
    /// Zero columns when context features are disabled.
    pub xc: Array2<f64>,
    pub y: Array1<f64>,
}

impl EncodedData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        use ndarray::Axis;
        Self {
            xa: self.xa.select(Axis(0), rows),
            xb: self.xb.select(Axis(0), rows),
            xc: self.xc.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
        }
    }

    /// Appends every row again with the two drugs swapped.
    pub fn with_swapped_pairs(&self) -> Self {
        use ndarray::{concatenate, Axis};
        Self {
            xa: concatenate![Axis(0), self.xa, self.xb],
            xb: concatenate![Axis(0), self.xb, self.xa],
            xc: concatenate![Axis(0), self.xc, self.xc],
            y: concatenate![Axis(0), self.y, self.y],
        }
    }
}

/// Encodes `data.triples[i]` for each `i` in `indices`.
pub fn encode(
    data: &TripleDataset,
    indices: &[usize],
    drugs: &DrugFeatureSet,
    contexts: Option<&ContextFeatureSet>,
    mode: FeatureMode,
) -> Result<EncodedData, PairScoreError> {
    let d = drugs.input_dim(mode)?;
    let c = contexts.map_or(0, ContextFeatureSet::dim);
    let n = indices.len();
    let mut xa = Array2::zeros((n, d));
    let mut xb = Array2::zeros((n, d));
    let mut xc = Array2::zeros((n, c));
    let mut y = Array1::zeros(n);
    for (r, &i) in indices.iter().enumerate() {
        let t = &data.triples[i];
        let fill = |id: &str, row: &mut [f64]| drugs.write_drug(id, mode, row);
        fill(&t.drug_a, xa.row_mut(r).as_slice_mut().expect("contiguous"))
            .map_err(|e| e.at_row(i))?;
        fill(&t.drug_b, xb.row_mut(r).as_slice_mut().expect("contiguous"))
            .map_err(|e| e.at_row(i))?;
        if let Some(ctx) = contexts {
            let v = ctx.get(&t.context).map_err(|e| e.at_row(i))?;
            xc.row_mut(r)
                .as_slice_mut()
                .expect("contiguous")
                .copy_from_slice(v);
        }
        y[r] = f64::from(t.label);
    }
    Ok(EncodedData { xa, xb, xc, y })
}
