//! Text checkpoint of a [`PairScorer`]:
//!
//! ```text
//! graphdr-scorer v1
//! mode fp+dr
//! dropout 5.0000000000000000e-1
//! context true
//! dims <drug_dim> <context_dim>
//! drug_hidden 128
//! context_hidden 128
//! head_hidden 32 32 32
//! param <rows> <cols>
//! <values>
//! ...
//! ```
//!
//! Values use 17 significant digits, so a save/load cycle is exact.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::FeatureMode;
use super::model::{PairScorer, ScorerConfig};
use super::PairScoreError;

const MAGIC: &str = "graphdr-scorer v1";

fn widths(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn save_checkpoint<W: Write>(model: &PairScorer, mut out: W) -> Result<(), PairScoreError> {
    let c = &model.config;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "mode {}", model.mode)?;
    writeln!(out, "dropout {:.16e}", c.dropout)?;
    writeln!(out, "context {}", c.use_context)?;
    writeln!(out, "dims {} {}", model.drug_dim(), model.context_dim())?;
    writeln!(out, "drug_hidden {}", widths(&c.drug_hidden))?;
    writeln!(out, "context_hidden {}", widths(&c.context_hidden))?;
    writeln!(out, "head_hidden {}", widths(&c.head_hidden))?;
    let layers = model
        .drug_encoder
        .layers()
        .chain(model.context_encoder.iter().flat_map(|m| m.layers()))
        .chain(model.head.layers());
    for layer in layers {
        for (rows, cols, values) in [
            (
                layer.weight.nrows(),
                layer.weight.ncols(),
                layer.weight.as_slice(),
            ),
            (1, layer.bias.len(), layer.bias.as_slice()),
        ] {
            writeln!(out, "param {rows} {cols}")?;
            let values = values.expect("standard layout");
            let text: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", text.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: BufRead>(input: R) -> Result<PairScorer, PairScoreError> {
    let bad = |m: String| PairScoreError::Checkpoint(m);
    let mut lines = input.lines();
    let mut next = || -> Result<String, PairScoreError> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file".into()))?
            .map_err(PairScoreError::from)
    };
    if next()? != MAGIC {
        return Err(bad("not a graphdr-scorer v1 checkpoint".into()));
    }
    let field = |line: String, key: &str| -> Result<String, PairScoreError> {
        let (k, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        if k != key {
            return Err(bad(format!("expected `{key}`, got `{line}`")));
        }
        Ok(rest.trim().to_string())
    };
    let nums = |s: &str| -> Result<Vec<usize>, PairScoreError> {
        s.split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad integer `{t}`"))))
            .collect()
    };
    let mode: FeatureMode = field(next()?, "mode")?.parse()?;
    let dropout: f64 = field(next()?, "dropout")?
        .parse()
        .map_err(|_| bad("bad dropout".into()))?;
    let use_context = match field(next()?, "context")?.as_str() {
        "true" => true,
        "false" => false,
        other => return Err(bad(format!("bad context flag `{other}`"))),
    };
    let dims = nums(&field(next()?, "dims")?)?;
    let [drug_dim, context_dim] = dims[..] else {
        return Err(bad("dims needs two values".into()));
    };
    let config = ScorerConfig {
        drug_hidden: nums(&field(next()?, "drug_hidden")?)?,
        context_hidden: nums(&field(next()?, "context_hidden")?)?,
        head_hidden: nums(&field(next()?, "head_hidden")?)?,
        dropout,
        use_context,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = PairScorer::new(config, mode, drug_dim, context_dim, &mut rng)?;
    let shapes: Vec<(usize, usize)> = {
        let layers = model
            .drug_encoder
            .layers()
            .chain(model.context_encoder.iter().flat_map(|m| m.layers()))
            .chain(model.head.layers());
        layers
            .flat_map(|l| [(l.weight.nrows(), l.weight.ncols()), (1, l.bias.len())])
            .collect()
    };
    for (slot, (rows, cols)) in model.params_mut().into_iter().zip(shapes) {
        let header = nums(&field(next()?, "param")?)?;
        if header != [rows, cols] {
            return Err(bad(format!(
                "parameter shape {header:?}, expected [{rows}, {cols}]"
            )));
        }
        let values: Vec<f64> = next()?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad value `{t}`"))))
            .collect::<Result<_, _>>()?;
        if values.len() != slot.len() {
            return Err(bad(format!(
                "{} values for a parameter of size {}",
                values.len(),
                slot.len()
            )));
        }
        slot.copy_from_slice(&values);
    }
    Ok(model)
}
