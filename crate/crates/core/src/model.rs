//! Differentiable scorers `f(x) ∈ (0, 1)`.
//!
//! Two architectures are supported: logistic regression and a multilayer
//! perceptron (affine → activation per hidden layer → affine → sigmoid) with
//! optional inverted dropout on hidden units. Parameters live in one flat
//! vector; [`Layout`] records where each layer's weights and bias sit.
//!
//! Gradients are derived by hand for these two shapes. Dropout masks are a
//! pure function of the mode seed, so a backward pass replays exactly the
//! masks of its forward pass.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{config_err, Error, Result};
use crate::math;
use crate::rng::{self, stream};

/// Output logits are clamped to this magnitude so scores stay strictly
/// inside (0, 1) in `f64`.
pub const LOGIT_LIMIT: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Logistic,
    Mlp,
}

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a = apply(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub activation: Activation,
}

impl ScorerSpec {
    pub fn logistic(input_dim: usize) -> Self {
        ScorerSpec {
            kind: ScorerKind::Logistic,
            input_dim,
            hidden_sizes: Vec::new(),
            dropout_rate: 0.0,
            activation: Activation::Tanh,
        }
    }

    pub fn mlp(input_dim: usize, hidden_sizes: Vec<usize>, dropout_rate: f64) -> Self {
        ScorerSpec {
            kind: ScorerKind::Mlp,
            input_dim,
            hidden_sizes,
            dropout_rate,
            activation: Activation::Tanh,
        }
    }

    /// Two hidden layers of 128 and 64 units, no dropout.
    pub fn default_mlp(input_dim: usize) -> Self {
        Self::mlp(input_dim, vec![128, 64], 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(config_err!("scorer input dimension must be positive"));
        }
        match self.kind {
            ScorerKind::Logistic if !self.hidden_sizes.is_empty() => {
                return Err(config_err!("logistic scorer takes no hidden layers"))
            }
            ScorerKind::Mlp if self.hidden_sizes.is_empty() => {
                return Err(config_err!("mlp scorer needs at least one hidden layer"))
            }
            _ => {}
        }
        if self.hidden_sizes.contains(&0) {
            return Err(config_err!("hidden layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(config_err!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let mut widths = Vec::with_capacity(self.hidden_sizes.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_sizes);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for pair in widths.windows(2) {
            let shape = LayerShape {
                inputs: pair[0],
                outputs: pair[1],
                offset,
            };
            offset += shape.len();
            layers.push(shape);
        }
        Layout { layers, len: offset }
    }
}

/// One affine layer inside the flat parameter vector: an `outputs × inputs`
/// row-major weight block at `offset`, followed by `outputs` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerShape>,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    layout: Layout,
    values: Vec<f64>,
}

impl ScorerParams {
    pub fn from_values(spec: &ScorerSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        if values.len() != layout.len {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.len,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(config_err!("parameters must be finite"));
        }
        Ok(ScorerParams { layout, values })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += step * direction`.
    pub(crate) fn add_scaled(&mut self, step: f64, direction: &[f64]) {
        for (v, d) in self.values.iter_mut().zip(direction) {
            *v += step * d;
        }
    }
}

/// Zero-mean Gaussian weights with standard deviation `1/√fan_in`, zero biases.
pub fn init_params(spec: &ScorerSpec, seed: u64) -> Result<ScorerParams> {
    spec.validate()?;
    let layout = spec.layout();
    let mut values = vec![0.0; layout.len];
    let mut rng = rng::rng(rng::derive_seed(seed, stream::INIT));
    for layer in &layout.layers {
        let normal = Normal::new(0.0, 1.0 / math::sqrt(layer.inputs as f64))
            .map_err(|e| config_err!("{e}"))?;
        for w in &mut values[layer.offset..layer.bias_offset()] {
            *w = normal.sample(&mut rng);
        }
    }
    Ok(ScorerParams { layout, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No dropout, no rescaling.
    Eval,
    /// Dropout on hidden units with masks drawn from `seed`.
    Train { seed: u64 },
}

impl Mode {
    /// Mode of the `index`-th instance of a batch.
    fn for_instance(self, index: usize) -> Mode {
        match self {
            Mode::Eval => Mode::Eval,
            Mode::Train { seed } => Mode::Train {
                seed: rng::derive_seed(seed, index as u64),
            },
        }
    }
}

fn check_input(spec: &ScorerSpec, params: &ScorerParams, x: &[f64]) -> Result<()> {
    if params.layout.len != spec.layout().len {
        return Err(Error::Shape("parameters do not match scorer spec".into()));
    }
    if x.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(config_err!("non-finite input feature"));
    }
    Ok(())
}

/// Per-instance record of a forward pass, enough to back-propagate.
#[derive(Debug, Clone)]
struct Trace {
    /// Hidden outputs after activation and before dropout, all layers concatenated.
    hidden: Vec<f64>,
    /// Dropout multipliers (0 or 1/(1-p)) aligned with `hidden`; empty when inactive.
    mask: Vec<f64>,
    score: f64,
    saturated: bool,
}

fn trace_one(spec: &ScorerSpec, params: &ScorerParams, x: &[f64], mode: Mode) -> Trace {
    let layers = &params.layout.layers;
    let w = &params.values;
    let hidden_total: usize = spec.hidden_sizes.iter().sum();
    let mut mask_rng = match mode {
        Mode::Train { seed } if spec.dropout_rate > 0.0 && hidden_total > 0 => {
            Some(rng::rng(rng::derive_seed(seed, stream::DROPOUT)))
        }
        _ => None,
    };
    let keep_scale = 1.0 / (1.0 - spec.dropout_rate);

    let mut hidden = Vec::with_capacity(hidden_total);
    let mut mask = Vec::new();
    // Inputs of the current layer: `x` for the first, dropped-out hidden units after.
    let mut current: Vec<f64> = x.to_vec();
    for layer in &layers[..layers.len() - 1] {
        let mut next = Vec::with_capacity(layer.outputs);
        for o in 0..layer.outputs {
            let row = &w[layer.offset + o * layer.inputs..layer.offset + (o + 1) * layer.inputs];
            let z = row.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>() + w[layer.bias_offset() + o];
            let a = spec.activation.apply(z);
            hidden.push(a);
            let m = match mask_rng.as_mut() {
                Some(r) => {
                    let m = if r.random::<f64>() < spec.dropout_rate {
                        0.0
                    } else {
                        keep_scale
                    };
                    mask.push(m);
                    m
                }
                None => 1.0,
            };
            next.push(a * m);
        }
        current = next;
    }

    let out = layers[layers.len() - 1];
    let z = w[out.offset..out.offset + out.inputs]
        .iter()
        .zip(&current)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + w[out.bias_offset()];
    let saturated = !(-LOGIT_LIMIT..=LOGIT_LIMIT).contains(&z);
    let score = math::sigmoid(z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT));
    Trace {
        hidden,
        mask,
        score,
        saturated,
    }
}

/// Score of a single instance.
pub fn forward(spec: &ScorerSpec, params: &ScorerParams, x: &[f64], mode: Mode) -> Result<f64> {
    check_input(spec, params, x)?;
    Ok(trace_one(spec, params, x, mode).score)
}

/// Scores of a batch in eval mode.
pub fn predict_scores(spec: &ScorerSpec, params: &ScorerParams, batch: &[&[f64]]) -> Result<Vec<f64>> {
    Ok(ForwardPass::run(spec, params, batch, Mode::Eval)?.scores)
}

/// A batch forward pass that remembers what backward needs.
///
/// Instance `i` of the batch uses the dropout stream of
/// `Mode::Train { seed: derive_seed(seed, i) }`, so it agrees with
/// [`forward`] called on that instance alone.
#[derive(Debug, Clone)]
pub struct ForwardPass<'a> {
    spec: &'a ScorerSpec,
    batch: &'a [&'a [f64]],
    traces: Vec<Trace>,
    scores: Vec<f64>,
}

impl<'a> ForwardPass<'a> {
    pub fn run(
        spec: &'a ScorerSpec,
        params: &ScorerParams,
        batch: &'a [&'a [f64]],
        mode: Mode,
    ) -> Result<Self> {
        spec.validate()?;
        for x in batch {
            check_input(spec, params, x)?;
        }
        let traces: Vec<Trace> = batch
            .iter()
            .enumerate()
            .map(|(i, x)| trace_one(spec, params, x, mode.for_instance(i)))
            .collect();
        let scores = traces.iter().map(|t| t.score).collect();
        Ok(ForwardPass {
            spec,
            batch,
            traces,
            scores,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Gradient of `Σ_i upstream[i] · f(x_i)` with respect to the parameters.
    /// Instances with a zero upstream value are skipped.
    pub fn backward(&self, params: &ScorerParams, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.batch.len() {
            return Err(Error::Shape(format!(
                "upstream has {} entries for a batch of {}",
                upstream.len(),
                self.batch.len()
            )));
        }
        let layers = &params.layout.layers;
        let w = &params.values;
        let mut grad = vec![0.0; params.layout.len];
        let n_layers = layers.len();
        let mut deltas: Vec<f64> = Vec::new();

        for ((x, trace), &up) in self.batch.iter().zip(&self.traces).zip(upstream) {
            if up == 0.0 || trace.saturated {
                continue;
            }
            // Offsets of each hidden layer inside `trace.hidden`.
            let mut starts = Vec::with_capacity(n_layers);
            let mut acc = 0;
            for layer in &layers[..n_layers - 1] {
                starts.push(acc);
                acc += layer.outputs;
            }

            deltas.clear();
            deltas.push(up * trace.score * (1.0 - trace.score));
            for li in (0..n_layers).rev() {
                let layer = layers[li];
                // Inputs that fed this layer, after dropout.
                let input_at = |j: usize| -> f64 {
                    if li == 0 {
                        x[j]
                    } else {
                        let k = starts[li - 1] + j;
                        let m = if trace.mask.is_empty() { 1.0 } else { trace.mask[k] };
                        trace.hidden[k] * m
                    }
                };
                for (o, &d) in deltas.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = layer.offset + o * layer.inputs;
                    for j in 0..layer.inputs {
                        grad[row + j] += d * input_at(j);
                    }
                    grad[layer.bias_offset() + o] += d;
                }
                if li == 0 {
                    break;
                }
                let prev_start = starts[li - 1];
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in deltas.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[layer.offset + o * layer.inputs..layer.offset + (o + 1) * layer.inputs];
                    for (p, &wij) in prev.iter_mut().zip(row) {
                        *p += d * wij;
                    }
                }
                for (j, p) in prev.iter_mut().enumerate() {
                    let k = prev_start + j;
                    let m = if trace.mask.is_empty() { 1.0 } else { trace.mask[k] };
                    *p *= m * self.spec.activation.derivative_from_output(trace.hidden[k]);
                }
                deltas = prev;
            }
        }
        Ok(grad)
    }
}

/// Gradient of `Σ_i upstream[i] · f(x_i)` over `batch`, replaying the dropout
/// masks of a forward pass run with the same `mode`.
pub fn backward(
    spec: &ScorerSpec,
    params: &ScorerParams,
    batch: &[&[f64]],
    upstream: &[f64],
    mode: Mode,
) -> Result<Vec<f64>> {
    if upstream.len() != batch.len() {
        return Err(Error::Shape(format!(
            "upstream has {} entries for a batch of {}",
            upstream.len(),
            batch.len()
        )));
    }
    ForwardPass::run(spec, params, batch, mode)?.backward(params, upstream)
}
