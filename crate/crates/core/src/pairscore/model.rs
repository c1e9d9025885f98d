use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::rngs::SmallRng;
use rand::{Rng, RngCore, SeedableRng};

use super::data::FeatureMode;
use super::PairScoreError;
use crate::skipgram::sigmoid;

/// Logits are clamped to this magnitude before computing the loss.
const LOGIT_CAP: f64 = 1e3;

/// Rows per forward/backward pass inside one minibatch.
const SLAB_ROWS: usize = 512;

/// Layer widths and regularisation of a [`PairScorer`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerConfig {
    pub drug_hidden: Vec<usize>,
    pub context_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub dropout: f64,
    /// Without context the head sees only the two drug codes.
    pub use_context: bool,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            drug_hidden: vec![128],
            context_hidden: vec![128],
            head_hidden: vec![32, 32, 32],
            dropout: 0.5,
            use_context: true,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<(), PairScoreError> {
        let bad = |m: &str| Err(PairScoreError::InvalidConfig(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.drug_hidden.is_empty() || (self.use_context && self.context_hidden.is_empty()) {
            return bad("encoders need at least one layer");
        }
        let widths = self
            .drug_hidden
            .iter()
            .chain(&self.context_hidden)
            .chain(&self.head_hidden);
        if widths.into_iter().any(|&w| w == 0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }
}

/// Fully connected layer, `y = x W + b` with `W` of shape `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Fan-in uniform initialisation, `U(-1/sqrt(in), 1/sqrt(in))` for
    /// weights and biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        let weight = Array2::from_shape_simple_fn((inputs, outputs), &mut draw);
        let bias = Array1::from_shape_simple_fn(outputs, &mut draw);
        Self { weight, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Stack of ReLU + dropout layers, optionally followed by a linear output
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Vec<Dense>,
    pub output: Option<Dense>,
}

struct MlpCache {
    inputs: Vec<Array2<f64>>,
    /// ReLU derivative times the inverted-dropout scale, per hidden layer.
    gates: Vec<Array2<f64>>,
}

impl Mlp {
    fn build<R: Rng + ?Sized>(
        inputs: usize,
        hidden: &[usize],
        output: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let mut width = inputs;
        let mut layers = Vec::with_capacity(hidden.len());
        for &h in hidden {
            layers.push(Dense::init(width, h, rng));
            width = h;
        }
        Self {
            hidden: layers,
            output: output.map(|o| Dense::init(width, o, rng)),
        }
    }

    pub fn output_dim(&self) -> usize {
        match (&self.output, self.hidden.last()) {
            (Some(o), _) => o.outputs(),
            (None, Some(h)) => h.outputs(),
            (None, None) => 0,
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain(self.output.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden.iter_mut().chain(self.output.iter_mut())
    }

    fn forward<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<f64>,
        dropout: f64,
        mut rng: Option<&mut R>,
        keep_cache: bool,
    ) -> (Array2<f64>, Option<MlpCache>) {
        let mut cache = MlpCache {
            inputs: Vec::new(),
            gates: Vec::new(),
        };
        let mut cur = x.to_owned();
        let scale = 1.0 / (1.0 - dropout);
        // a unit is dropped when a uniform 32-bit draw falls below this
        let cut = (dropout * 4_294_967_296.0) as u64;
        for layer in &self.hidden {
            let pre = layer.forward(cur.view());
            let gate = match rng.as_deref_mut() {
                // branch-free: the keep bit is a coin flip the predictor cannot learn
                Some(r) if dropout > 0.0 => {
                    let mut masks = SmallRng::seed_from_u64(r.next_u64());
                    pre.mapv(|p| {
                        let keep = u64::from(masks.next_u32()) >= cut;
                        f64::from(u8::from((p > 0.0) & keep)) * scale
                    })
                }
                _ => pre.mapv(|p| if p > 0.0 { 1.0 } else { 0.0 }),
            };
            let out = &pre * &gate;
            if keep_cache {
                cache.inputs.push(std::mem::replace(&mut cur, out));
                cache.gates.push(gate);
            } else {
                cur = out;
            }
        }
        if let Some(o) = &self.output {
            let out = o.forward(cur.view());
            if keep_cache {
                cache.inputs.push(cur);
            }
            cur = out;
        }
        (cur, keep_cache.then_some(cache))
    }

    /// Accumulates parameter gradients into `grads`; returns the gradient with
    /// respect to the MLP input when `input_grad` is set.
    fn backward(
        &self,
        cache: &MlpCache,
        d_out: Array2<f64>,
        grads: &mut [(Array2<f64>, Array1<f64>)],
        input_grad: bool,
    ) -> Option<Array2<f64>> {
        let mut d = d_out;
        let n_hidden = self.hidden.len();
        if let Some(o) = &self.output {
            let x = &cache.inputs[n_hidden];
            let (gw, gb) = &mut grads[n_hidden];
            general_mat_mul(1.0, &x.t(), &d, 1.0, gw);
            *gb += &d.sum_axis(Axis(0));
            if n_hidden == 0 && !input_grad {
                return None;
            }
            d = d.dot(&o.weight.t());
        }
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let d_pre = &d * &cache.gates[i];
            let x = &cache.inputs[i];
            let (gw, gb) = &mut grads[i];
            general_mat_mul(1.0, &x.t(), &d_pre, 1.0, gw);
            *gb += &d_pre.sum_axis(Axis(0));
            if i == 0 && !input_grad {
                return None;
            }
            d = d_pre.dot(&layer.weight.t());
        }
        Some(d)
    }

    fn zero_grads(&self) -> Vec<(Array2<f64>, Array1<f64>)> {
        self.layers()
            .map(|l| {
                (
                    Array2::zeros(l.weight.raw_dim()),
                    Array1::zeros(l.bias.len()),
                )
            })
            .collect()
    }
}

/// Gradients with the same layout as the scorer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub drug: Vec<(Array2<f64>, Array1<f64>)>,
    pub context: Vec<(Array2<f64>, Array1<f64>)>,
    pub head: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    /// Flat views in parameter order (see [`PairScorer::params_mut`]).
    pub fn slices(&self) -> Vec<&[f64]> {
        self.drug
            .iter()
            .chain(&self.context)
            .chain(&self.head)
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Shared drug encoder, context encoder and prediction head.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScorer {
    pub config: ScorerConfig,
    pub mode: FeatureMode,
    pub drug_encoder: Mlp,
    pub context_encoder: Option<Mlp>,
    pub head: Mlp,
}

struct ForwardCache {
    drug_a: MlpCache,
    drug_b: MlpCache,
    context: Option<MlpCache>,
    head: MlpCache,
    /// Width of one drug code inside the head input.
    drug_width: usize,
}

impl PairScorer {
    pub fn new<R: Rng + ?Sized>(
        config: ScorerConfig,
        mode: FeatureMode,
        drug_dim: usize,
        context_dim: usize,
        rng: &mut R,
    ) -> Result<Self, PairScoreError> {
        config.validate()?;
        if drug_dim == 0 {
            return Err(PairScoreError::InvalidConfig(
                "drug input dimension is zero".into(),
            ));
        }
        if config.use_context && context_dim == 0 {
            return Err(PairScoreError::InvalidConfig(
                "context features enabled but context dimension is zero".into(),
            ));
        }
        let drug_encoder = Mlp::build(drug_dim, &config.drug_hidden, None, rng);
        let context_encoder = config
            .use_context
            .then(|| Mlp::build(context_dim, &config.context_hidden, None, rng));
        let head_in =
            2 * drug_encoder.output_dim() + context_encoder.as_ref().map_or(0, Mlp::output_dim);
        let head = Mlp::build(head_in, &config.head_hidden, Some(1), rng);
        Ok(Self {
            config,
            mode,
            drug_encoder,
            context_encoder,
            head,
        })
    }

    pub fn drug_dim(&self) -> usize {
        self.drug_encoder.hidden[0].inputs()
    }

    pub fn context_dim(&self) -> usize {
        self.context_encoder
            .as_ref()
            .map_or(0, |c| c.hidden[0].inputs())
    }

    fn all_layers(&self) -> impl Iterator<Item = &Dense> {
        self.drug_encoder
            .layers()
            .chain(self.context_encoder.iter().flat_map(Mlp::layers))
            .chain(self.head.layers())
    }

    /// Mutable flat views of every weight and bias, in a fixed order shared
    /// with [`Gradients::slices`].
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.drug_encoder
            .layers_mut()
            .chain(self.context_encoder.iter_mut().flat_map(Mlp::layers_mut))
            .chain(self.head.layers_mut())
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.all_layers()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }

    fn check_shapes(
        &self,
        xa: &ArrayView2<f64>,
        xb: &ArrayView2<f64>,
        xc: &ArrayView2<f64>,
    ) -> Result<(), PairScoreError> {
        let n = xa.nrows();
        if xb.nrows() != n || xc.nrows() != n {
            return Err(PairScoreError::ShapeMismatch(format!(
                "row counts differ: {} / {} / {}",
                n,
                xb.nrows(),
                xc.nrows()
            )));
        }
        if xa.ncols() != self.drug_dim() || xb.ncols() != self.drug_dim() {
            return Err(PairScoreError::ShapeMismatch(format!(
                "drug inputs have {} and {} columns, model expects {}",
                xa.ncols(),
                xb.ncols(),
                self.drug_dim()
            )));
        }
        if xc.ncols() != self.context_dim() {
            return Err(PairScoreError::ShapeMismatch(format!(
                "context input has {} columns, model expects {}",
                xc.ncols(),
                self.context_dim()
            )));
        }
        Ok(())
    }

    fn forward_inner<R: Rng + ?Sized>(
        &self,
        xa: ArrayView2<f64>,
        xb: ArrayView2<f64>,
        xc: ArrayView2<f64>,
        mut rng: Option<&mut R>,
        keep_cache: bool,
    ) -> (Array1<f64>, Option<ForwardCache>) {
        let p = self.config.dropout;
        let (ha, ca) = self
            .drug_encoder
            .forward(xa, p, rng.as_deref_mut(), keep_cache);
        let (hb, cb) = self
            .drug_encoder
            .forward(xb, p, rng.as_deref_mut(), keep_cache);
        let (hc, cc) = match &self.context_encoder {
            Some(enc) => {
                let (hc, cc) = enc.forward(xc, p, rng.as_deref_mut(), keep_cache);
                (Some(hc), cc)
            }
            None => (None, None),
        };
        let joined = join_columns(&ha, &hb, hc.as_ref());
        let (out, ch) = self.head.forward(joined.view(), p, rng, keep_cache);
        let logits = out.column(0).to_owned();
        let cache = keep_cache.then(|| ForwardCache {
            drug_a: ca.expect("cache kept"),
            drug_b: cb.expect("cache kept"),
            context: cc,
            head: ch.expect("cache kept"),
            drug_width: self.drug_encoder.output_dim(),
        });
        (logits, cache)
    }

    /// Pre-sigmoid scores. Dropout is active only when `rng` is given.
    pub fn logits<R: Rng + ?Sized>(
        &self,
        xa: ArrayView2<f64>,
        xb: ArrayView2<f64>,
        xc: ArrayView2<f64>,
        rng: Option<&mut R>,
    ) -> Result<Array1<f64>, PairScoreError> {
        self.check_shapes(&xa, &xb, &xc)?;
        Ok(self.forward_inner(xa, xb, xc, rng, false).0)
    }

    /// Score of one triple in `(0, 1)`. `train` enables dropout.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        xa: &[f64],
        xb: &[f64],
        xc: &[f64],
        train: bool,
        rng: &mut R,
    ) -> Result<f64, PairScoreError> {
        let row = |x: &[f64]| Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("1 row");
        let (a, b, c) = (row(xa), row(xb), row(xc));
        let z = self.logits(a.view(), b.view(), c.view(), train.then_some(rng))?;
        Ok(sigmoid(z[0]))
    }

    /// Mean BCE over the batch and its exact gradient. Dropout is active only
    /// when `rng` is given.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &self,
        xa: ArrayView2<f64>,
        xb: ArrayView2<f64>,
        xc: ArrayView2<f64>,
        y: &Array1<f64>,
        rng: Option<&mut R>,
    ) -> Result<(f64, Gradients), PairScoreError> {
        self.check_shapes(&xa, &xb, &xc)?;
        let n = xa.nrows();
        if y.len() != n || n == 0 {
            return Err(PairScoreError::ShapeMismatch(format!(
                "{} labels for {n} rows",
                y.len()
            )));
        }
        let inv_n = 1.0 / n as f64;
        let mut grads = Gradients {
            drug: self.drug_encoder.zero_grads(),
            context: self
                .context_encoder
                .as_ref()
                .map_or_else(Vec::new, Mlp::zero_grads),
            head: self.head.zero_grads(),
        };
        // cache-sized slabs; gradients accumulate exactly as for one pass
        let mut rng = rng;
        let mut loss = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + SLAB_ROWS).min(n);
            let rows = s![start..end, ..];
            loss += self.accumulate(
                xa.slice(rows),
                xb.slice(rows),
                xc.slice(rows),
                y.slice(s![start..end]),
                inv_n,
                rng.as_deref_mut(),
                &mut grads,
            );
            start = end;
        }
        Ok((loss * inv_n, grads))
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate<R: Rng + ?Sized>(
        &self,
        xa: ArrayView2<f64>,
        xb: ArrayView2<f64>,
        xc: ArrayView2<f64>,
        y: ArrayView1<f64>,
        inv_n: f64,
        rng: Option<&mut R>,
        grads: &mut Gradients,
    ) -> f64 {
        let (z, cache) = self.forward_inner(xa, xb, xc, rng, true);
        let cache = cache.expect("cache kept");
        let loss: f64 = z
            .iter()
            .zip(&y)
            .map(|(&zi, &yi)| bce_with_logit(zi, yi))
            .sum();
        let d_logit: Array1<f64> = z
            .iter()
            .zip(&y)
            .map(|(&zi, &yi)| (sigmoid(zi.clamp(-LOGIT_CAP, LOGIT_CAP)) - yi) * inv_n)
            .collect();
        let d_out = d_logit.insert_axis(Axis(1));
        let d_joined = self
            .head
            .backward(&cache.head, d_out, &mut grads.head, true)
            .expect("input gradient requested");
        let w = cache.drug_width;
        let d_ha = d_joined.slice(s![.., ..w]).to_owned();
        let d_hb = d_joined.slice(s![.., w..2 * w]).to_owned();
        self.drug_encoder
            .backward(&cache.drug_a, d_ha, &mut grads.drug, false);
        self.drug_encoder
            .backward(&cache.drug_b, d_hb, &mut grads.drug, false);
        if let (Some(enc), Some(cc)) = (&self.context_encoder, &cache.context) {
            let d_hc = d_joined.slice(s![.., 2 * w..]).to_owned();
            enc.backward(cc, d_hc, &mut grads.context, false);
        }
        loss
    }

    /// Mean BCE without dropout.
    pub fn loss(
        &self,
        xa: ArrayView2<f64>,
        xb: ArrayView2<f64>,
        xc: ArrayView2<f64>,
        y: &Array1<f64>,
    ) -> Result<f64, PairScoreError> {
        let z = self.logits::<rand_chacha::ChaCha8Rng>(xa, xb, xc, None)?;
        Ok(z.iter()
            .zip(y)
            .map(|(&zi, &yi)| bce_with_logit(zi, yi))
            .sum::<f64>()
            / y.len() as f64)
    }
}

/// `[a | b | c]` row by row; much faster than `concatenate!` on large slabs.
fn join_columns(a: &Array2<f64>, b: &Array2<f64>, c: Option<&Array2<f64>>) -> Array2<f64> {
    let (wa, wb) = (a.ncols(), b.ncols());
    let wc = c.map_or(0, Array2::ncols);
    let mut out = Array2::zeros((a.nrows(), wa + wb + wc));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let row = row.as_slice_mut().expect("standard layout");
        row[..wa].copy_from_slice(a.row(i).as_slice().expect("standard layout"));
        row[wa..wa + wb].copy_from_slice(b.row(i).as_slice().expect("standard layout"));
        if let Some(c) = c {
            row[wa + wb..].copy_from_slice(c.row(i).as_slice().expect("standard layout"));
        }
    }
    out
}

/// `-[y ln σ(z) + (1-y) ln(1-σ(z))]` evaluated stably from the logit.
pub fn bce_with_logit(logit: f64, y: f64) -> f64 {
    let z = logit.clamp(-LOGIT_CAP, LOGIT_CAP);
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// BCE of a probability, via its logit.
pub fn bce_loss(prob: f64, y: f64) -> f64 {
    let logit = if prob <= 0.0 {
        -LOGIT_CAP
    } else if prob >= 1.0 {
        LOGIT_CAP
    } else {
        (prob / (1.0 - prob)).ln()
    };
    bce_with_logit(logit, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn tiny(seed: u64, use_context: bool) -> PairScorer {
        let cfg = ScorerConfig {
            drug_hidden: vec![4],
            context_hidden: vec![4],
            head_hidden: vec![4, 4, 4],
            dropout: 0.0,
            use_context,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PairScorer::new(cfg, FeatureMode::Dr, 5, 3, &mut rng).unwrap()
    }

    fn random_batch(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |c| Array2::from_shape_simple_fn((n, c), || rng.random_range(-1.0..1.0));
        let (a, b, c) = (m(5), m(5), m(3));
        let y = Array1::from_shape_fn(n, |i| (i % 2) as f64);
        (a, b, c, y)
    }

    #[test]
    fn zero_model_scores_half() {
        let mut m = tiny(1, true);
        for p in m.params_mut() {
            p.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = m
            .forward(&[3.0; 5], &[-1.0; 5], &[1.0, 0.0, 0.0], false, &mut rng)
            .unwrap();
        assert_eq!(y, 0.5);
    }

    #[test]
    fn inference_is_deterministic_and_in_range() {
        let m = tiny(2, true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [0.3, -0.2, 0.9, 0.0, 1.0];
        let a = m
            .forward(&x, &x, &[0.0, 1.0, 0.0], false, &mut rng)
            .unwrap();
        let b = m
            .forward(&x, &x, &[0.0, 1.0, 0.0], false, &mut rng)
            .unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a < 1.0);
        assert!(matches!(
            m.forward(&x[..4], &x, &[0.0, 1.0, 0.0], false, &mut rng),
            Err(PairScoreError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.5, 0.0) - LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, 1.0) - LN_2).abs() < 1e-15);
        assert!(bce_loss(1.0, 1.0) < 1e-300);
        assert!(bce_with_logit(f64::INFINITY, 1.0).abs() < 1e-300);
        assert!((bce_with_logit(-800.0, 1.0) - 800.0).abs() < 1e-9);
        let mean = (bce_loss(0.5, 0.0) + bce_loss(0.5, 1.0)) / 2.0;
        assert!((mean - LN_2).abs() < 1e-15);
    }

    fn finite_difference_check(m: &mut PairScorer, seed: u64) {
        let (xa, xb, xc, y) = random_batch(6, seed);
        let xc = xc.slice(s![.., ..m.context_dim()]).to_owned();
        let (_, grads) = m
            .loss_and_grads::<ChaCha8Rng>(xa.view(), xb.view(), xc.view(), &y, None)
            .unwrap();
        let analytic: Vec<f64> = grads.slices().concat();
        let total = m.param_count();
        assert_eq!(analytic.len(), total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let h = 1e-4;
        for _ in 0..20 {
            let k = rng.random_range(0..total);
            let (slot, off) = locate(m, k);
            let orig = m.params()[slot][off];
            m.params_mut()[slot][off] = orig + h;
            let up = m.loss(xa.view(), xb.view(), xc.view(), &y).unwrap();
            m.params_mut()[slot][off] = orig - h;
            let down = m.loss(xa.view(), xb.view(), xc.view(), &y).unwrap();
            m.params_mut()[slot][off] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[k].abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic[k] - numeric).abs() / denom < 1e-4,
                "param {k}: analytic {} numeric {numeric}",
                analytic[k]
            );
        }
    }

    fn locate(m: &PairScorer, mut k: usize) -> (usize, usize) {
        for (i, s) in m.params().iter().enumerate() {
            if k < s.len() {
                return (i, k);
            }
            k -= s.len();
        }
        panic!("index out of range");
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            finite_difference_check(&mut tiny(seed, true), seed);
            finite_difference_check(&mut tiny(seed + 10, false), seed);
        }
    }

    #[test]
    fn saturated_model_has_vanishing_gradient() {
        let mut m = tiny(3, true);
        let last = m.head.output.as_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(60.0);
        let (xa, xb, xc, _) = random_batch(8, 4);
        let y = Array1::ones(8);
        let (loss, g) = m
            .loss_and_grads::<ChaCha8Rng>(xa.view(), xb.view(), xc.view(), &y, None)
            .unwrap();
        assert!(loss < 1e-20);
        assert!(g.norm() < 1e-6);
    }

    #[test]
    fn shared_encoder_collects_both_drugs() {
        let m = tiny(5, true);
        let mut xa = Array2::zeros((1, 5));
        let mut xb = Array2::zeros((1, 5));
        xa[[0, 0]] = 1.0;
        xb[[0, 1]] = 1.0;
        let xc = Array2::from_shape_vec((1, 3), vec![1.0, 0.0, 0.0]).unwrap();
        // make every encoder unit active so both rows receive gradient
        let mut m = m;
        m.drug_encoder.hidden[0].bias.fill(1.0);
        m.drug_encoder.hidden[0].weight.mapv_inplace(f64::abs);
        let (_, g) = m
            .loss_and_grads::<ChaCha8Rng>(xa.view(), xb.view(), xc.view(), &Array1::ones(1), None)
            .unwrap();
        let w = &g.drug[0].0;
        assert!(w.row(0).iter().any(|&x| x != 0.0));
        assert!(w.row(1).iter().any(|&x| x != 0.0));
        assert!(w.row(2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dropout_changes_training_pass_only() {
        let cfg = ScorerConfig {
            dropout: 0.5,
            ..ScorerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = PairScorer::new(cfg, FeatureMode::Fp, 5, 3, &mut rng).unwrap();
        let (xa, xb, xc, _) = random_batch(4, 9);
        let a = m
            .logits::<ChaCha8Rng>(xa.view(), xb.view(), xc.view(), None)
            .unwrap();
        let b = m
            .logits::<ChaCha8Rng>(xa.view(), xb.view(), xc.view(), None)
            .unwrap();
        assert_eq!(a, b);
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let c = m
            .logits(xa.view(), xb.view(), xc.view(), Some(&mut r))
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn swapped_order_stays_valid() {
        let m = tiny(6, true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = [1.0, 0.0, 2.0, 0.0, 0.5];
        let b = [0.0, 1.0, 0.0, 3.0, 0.0];
        let c = [0.0, 0.0, 1.0];
        for (x, y) in [(&a, &b), (&b, &a)] {
            let p = m.forward(x, y, &c, false, &mut rng).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn config_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = ScorerConfig {
            dropout: 1.0,
            ..ScorerConfig::default()
        };
        assert!(PairScorer::new(bad, FeatureMode::Fp, 4, 2, &mut rng).is_err());
        assert!(PairScorer::new(ScorerConfig::default(), FeatureMode::Fp, 4, 0, &mut rng).is_err());
        let no_ctx = ScorerConfig {
            use_context: false,
            ..ScorerConfig::default()
        };
        let m = PairScorer::new(no_ctx, FeatureMode::Fp, 4, 0, &mut rng).unwrap();
        assert_eq!(m.head.hidden[0].inputs(), 256);
        let m =
            PairScorer::new(ScorerConfig::default(), FeatureMode::Fp, 320, 5, &mut rng).unwrap();
        assert_eq!(m.head.hidden[0].inputs(), 384);
        assert_eq!(m.head.output.as_ref().unwrap().inputs(), 32);
    }
}
