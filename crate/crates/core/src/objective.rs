//! The joint training objective.
//!
//! Scores are turned into soft predictions `ŷ = σ(s·(f − γ))` for every
//! threshold `γ` of a grid. For each `γ` the objective is
//! `O(γ) = O_s(γ) + λ·O_g(γ)`, where `O_s` is soft accuracy on strongly
//! labeled instances and `O_g` is either soft accuracy against group labels
//! (balanced mode) or the noise-corrected G-measure surrogate
//! `(Σŷg − β̂Σŷ)² / (N·Σŷ)` (imbalanced mode). The maximum over the grid is
//! smoothed with a softmax at temperature `τ·(1 + λ)` so the whole thing
//! stays differentiable in the scores. Scaling `τ` by the total term weight
//! keeps the smoothing independent of `λ`: with a fixed temperature a large
//! `λ` turns the softmax into a hard max, and gradient ascent from a poor
//! start stalls on the flat grid points where every prediction is the same.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, Error, Result};
use crate::math;

/// Denominators below this are treated as a degenerate (all-negative) prediction.
pub const DEGENERATE_FLOOR: f64 = 1e-8;

pub const DEFAULT_SHARPNESS: f64 = 100.0;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// `{0.01, 0.02, …, 0.99}`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

/// Which surrogate scores the weakly labeled set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakMode {
    /// Accuracy against group labels.
    Balanced,
    /// G-measure surrogate corrected by the estimated `β = Pr(g=1 | y=0)`.
    Imbalanced { beta_hat: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    /// Weight of the weak term.
    pub lambda: f64,
    /// Sharpness `s` of the soft threshold.
    pub sharpness: f64,
    pub gamma_grid: Vec<f64>,
    /// Softmax temperature `τ` over the grid, relative to the total term
    /// weight (`1 + λ` with a strong set, `λ` without).
    pub temperature: f64,
    pub mode: WeakMode,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            lambda: 1.0,
            sharpness: DEFAULT_SHARPNESS,
            gamma_grid: default_gamma_grid(),
            temperature: DEFAULT_TEMPERATURE,
            mode: WeakMode::Balanced,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(config_err!("lambda must be a finite non-negative number, got {}", self.lambda));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(config_err!("sharpness must be positive, got {}", self.sharpness));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(config_err!("temperature must be positive, got {}", self.temperature));
        }
        validate_grid(&self.gamma_grid)?;
        if let WeakMode::Imbalanced { beta_hat } = self.mode {
            if !(0.0..1.0).contains(&beta_hat) {
                return Err(config_err!("beta_hat must lie in [0, 1), got {beta_hat}"));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(config_err!("gamma grid is empty"));
    }
    if grid.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
        return Err(config_err!("gamma grid values must lie in (0, 1)"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err!("gamma grid must be strictly ascending"));
    }
    Ok(())
}

/// `1 / (1 + exp(−s·(score − γ)))`.
#[inline]
pub fn soft_threshold(score: f64, gamma: f64, sharpness: f64) -> f64 {
    math::sigmoid(sharpness * (score - gamma))
}

/// A surrogate metric computed from soft predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftMetric {
    /// `(1/N) Σ ŷ·l + (1−ŷ)(1−l)`.
    Accuracy,
    /// `(Σŷl − βΣŷ)² / (N·Σŷ)`, zero when `Σŷ` falls below the floor.
    GMeasure { beta: f64 },
    /// `2TP / (2TP + FP + FN)` with soft counts, zero below the floor.
    FMeasure,
}

/// Sufficient statistics of one labeled set at one threshold.
#[derive(Debug, Clone, Copy, Default)]
struct SoftCounts {
    n: f64,
    labeled_pos: f64,
    /// `Σ ŷ·l`
    hits: f64,
    /// `Σ ŷ`
    predicted: f64,
}

/// Metric value and its derivative w.r.t. each soft prediction, which always
/// has the form `c0 + c1·l`.
#[derive(Debug, Clone, Copy)]
struct MetricEval {
    value: f64,
    c0: f64,
    c1: f64,
    degenerate: bool,
}

impl SoftMetric {
    fn eval(self, c: SoftCounts) -> MetricEval {
        match self {
            SoftMetric::Accuracy => MetricEval {
                value: (2.0 * c.hits - c.predicted + c.n - c.labeled_pos) / c.n,
                c0: -1.0 / c.n,
                c1: 2.0 / c.n,
                degenerate: false,
            },
            SoftMetric::GMeasure { beta } => {
                if c.predicted < DEGENERATE_FLOOR {
                    return MetricEval {
                        value: 0.0,
                        c0: 0.0,
                        c1: 0.0,
                        degenerate: true,
                    };
                }
                let d = c.hits - beta * c.predicted;
                let np = c.n * c.predicted;
                MetricEval {
                    value: d * d / np,
                    c0: -2.0 * d * beta / np - d * d / (np * c.predicted),
                    c1: 2.0 * d / np,
                    degenerate: false,
                }
            }
            SoftMetric::FMeasure => {
                let den = c.predicted + c.labeled_pos;
                if den < DEGENERATE_FLOOR {
                    return MetricEval {
                        value: 0.0,
                        c0: 0.0,
                        c1: 0.0,
                        degenerate: true,
                    };
                }
                MetricEval {
                    value: 2.0 * c.hits / den,
                    c0: -2.0 * c.hits / (den * den),
                    c1: 2.0 / den,
                    degenerate: false,
                }
            }
        }
    }
}

/// Scores paired with binary labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledScores<'a> {
    pub scores: &'a [f64],
    pub labels: &'a [bool],
}

impl<'a> LabeledScores<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(alloc::format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(config_err!("scores must be finite"));
        }
        Ok(LabeledScores { scores, labels })
    }
}

/// One weighted metric inside a grid objective.
#[derive(Debug, Clone, Copy)]
pub struct Term<'a> {
    pub metric: SoftMetric,
    pub weight: f64,
    pub data: LabeledScores<'a>,
}

/// Result of evaluating an objective over the γ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridObjective {
    /// Softmax-smoothed maximum over the grid.
    pub value: f64,
    /// `O(γ)` for each grid point.
    pub per_gamma: Vec<f64>,
    /// True when a G-/F-measure term hit the degenerate-denominator guard at
    /// the grid point carrying the largest softmax weight.
    pub degenerate: bool,
}

impl GridObjective {
    /// Index of the best grid point (first one on ties).
    pub fn argmax(&self) -> usize {
        math::argmax(&self.per_gamma).unwrap_or(0)
    }
}

/// Soft thresholds of one score against the whole grid.
///
/// When `s·(|score| + |γ|)` cannot overflow, `σ(s(score − γ))` is evaluated as
/// `1 / (1 + e^{−s·score}·e^{s·γ})` with the second factor precomputed, which
/// costs one `exp` per score instead of one per grid point.
struct ThresholdRow<'a> {
    grid: &'a [f64],
    sharpness: f64,
    exp_gamma: Option<Vec<f64>>,
}

const EXP_SAFE: f64 = 600.0;

impl<'a> ThresholdRow<'a> {
    fn new(grid: &'a [f64], sharpness: f64, scores: &[&[f64]]) -> Self {
        let max_gamma = grid.iter().fold(0.0f64, |m, g| m.max(math::abs(*g)));
        let max_score = scores.iter().flat_map(|s| s.iter()).fold(0.0f64, |m, x| m.max(math::abs(*x)));
        let exp_gamma = (sharpness * (max_gamma + max_score) <= EXP_SAFE)
            .then(|| grid.iter().map(|&g| math::exp(sharpness * g)).collect());
        ThresholdRow {
            grid,
            sharpness,
            exp_gamma,
        }
    }

    fn fill(&self, score: f64, out: &mut [f64]) {
        match &self.exp_gamma {
            Some(eg) => {
                let u = math::exp(-self.sharpness * score);
                for (o, &e) in out.iter_mut().zip(eg) {
                    *o = 1.0 / (1.0 + u * e);
                }
            }
            None => {
                for (o, &g) in out.iter_mut().zip(self.grid) {
                    *o = soft_threshold(score, g, self.sharpness);
                }
            }
        }
    }
}

/// `(Σ p_k O_k, dV/dO_k)` with `p = softmax(O/τ)`.
fn smooth_max(values: &[f64], temperature: f64) -> (f64, Vec<f64>) {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = values.iter().map(|&o| math::exp((o - top) / temperature)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let value: f64 = weights.iter().zip(values).map(|(p, o)| p * o).sum();
    let slopes = weights
        .iter()
        .zip(values)
        .map(|(p, o)| p * (1.0 + (o - value) / temperature))
        .collect();
    (value, slopes)
}

/// Evaluates `softmax-max_γ Σ_t weight_t · metric_t(ŷ^γ)` and optionally its
/// gradient w.r.t. every score of every term.
pub fn grid_objective(
    terms: &[Term<'_>],
    sharpness: f64,
    gamma_grid: &[f64],
    temperature: f64,
    with_gradient: bool,
) -> Result<(GridObjective, Option<Vec<Vec<f64>>>)> {
    if terms.is_empty() {
        return Err(config_err!("objective has no terms"));
    }
    validate_grid(gamma_grid)?;
    let k = gamma_grid.len();
    let all_scores: Vec<&[f64]> = terms.iter().map(|t| t.data.scores).collect();
    let row = ThresholdRow::new(gamma_grid, sharpness, &all_scores);
    let mut yk = vec![0.0; k];

    let mut evals: Vec<Vec<MetricEval>> = Vec::with_capacity(terms.len());
    let mut per_gamma = vec![0.0; k];
    for term in terms {
        let mut counts = vec![
            SoftCounts {
                n: term.data.scores.len() as f64,
                labeled_pos: term.data.labels.iter().filter(|&&l| l).count() as f64,
                ..SoftCounts::default()
            };
            k
        ];
        for (&score, &label) in term.data.scores.iter().zip(term.data.labels) {
            row.fill(score, &mut yk);
            for (c, &y) in counts.iter_mut().zip(&yk) {
                c.predicted += y;
                if label {
                    c.hits += y;
                }
            }
        }
        let e: Vec<MetricEval> = counts.into_iter().map(|c| term.metric.eval(c)).collect();
        for (o, ev) in per_gamma.iter_mut().zip(&e) {
            *o += term.weight * ev.value;
        }
        evals.push(e);
    }

    // The temperature is relative to the total term weight, so the same τ
    // smooths `O_s + λ·O_g` equally for every λ.
    let scale: f64 = terms.iter().map(|t| t.weight).sum();
    let (value, slopes) = smooth_max(&per_gamma, temperature * scale);
    let best = math::argmax(&per_gamma).unwrap_or(0);
    let degenerate = evals.iter().any(|e| e[best].degenerate);
    let objective = GridObjective {
        value,
        per_gamma,
        degenerate,
    };
    if !with_gradient {
        return Ok((objective, None));
    }

    let mut grads = Vec::with_capacity(terms.len());
    for (term, e) in terms.iter().zip(&evals) {
        // Per-γ multipliers of (c0 + c1·l).
        let a0: Vec<f64> = e.iter().zip(&slopes).map(|(ev, sl)| sl * term.weight * ev.c0).collect();
        let a1: Vec<f64> = e.iter().zip(&slopes).map(|(ev, sl)| sl * term.weight * ev.c1).collect();
        let g: Vec<f64> = term
            .data
            .scores
            .iter()
            .zip(term.data.labels)
            .map(|(&score, &label)| {
                row.fill(score, &mut yk);
                let mut acc = 0.0;
                for ((&y, &b0), &b1) in yk.iter().zip(&a0).zip(&a1) {
                    let coef = if label { b0 + b1 } else { b0 };
                    acc += coef * y * (1.0 - y);
                }
                sharpness * acc
            })
            .collect();
        grads.push(g);
    }
    Ok((objective, Some(grads)))
}

fn soft_predictions(preds: &[f64], labels: &[bool]) -> Result<SoftCounts> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(alloc::format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut c = SoftCounts {
        n: preds.len() as f64,
        ..SoftCounts::default()
    };
    for (&p, &l) in preds.iter().zip(labels) {
        c.predicted += p;
        if l {
            c.hits += p;
            c.labeled_pos += 1.0;
        }
    }
    Ok(c)
}

/// Soft accuracy of `soft_preds` against true labels.
pub fn objective_strong(soft_preds: &[f64], y: &[bool]) -> Result<f64> {
    Ok(SoftMetric::Accuracy.eval(soft_predictions(soft_preds, y)?).value)
}

/// Soft accuracy of `soft_preds` against group labels.
pub fn objective_weak_balanced(soft_preds: &[f64], g: &[bool]) -> Result<f64> {
    Ok(SoftMetric::Accuracy.eval(soft_predictions(soft_preds, g)?).value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMeasureSurrogate {
    pub value: f64,
    /// Set when `Σŷ` was below [`DEGENERATE_FLOOR`] and the value forced to 0.
    pub degenerate: bool,
}

/// Noise-corrected G-measure surrogate `(Σŷg − β̂Σŷ)² / (N·Σŷ)`.
pub fn objective_weak_gmeasure(soft_preds: &[f64], g: &[bool], beta_hat: f64) -> Result<GMeasureSurrogate> {
    let ev = SoftMetric::GMeasure { beta: beta_hat }.eval(soft_predictions(soft_preds, g)?);
    Ok(GMeasureSurrogate {
        value: ev.value,
        degenerate: ev.degenerate,
    })
}

fn weak_metric(mode: WeakMode) -> SoftMetric {
    match mode {
        WeakMode::Balanced => SoftMetric::Accuracy,
        WeakMode::Imbalanced { beta_hat } => SoftMetric::GMeasure { beta: beta_hat },
    }
}

/// Gradient of the combined objective w.r.t. strong and weak scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreGradients {
    pub strong: Vec<f64>,
    pub weak: Vec<f64>,
}

fn combined_terms<'a>(
    strong: Option<LabeledScores<'a>>,
    weak: Option<LabeledScores<'a>>,
    cfg: &ObjectiveConfig,
) -> Result<Vec<Term<'a>>> {
    cfg.validate()?;
    let mut terms = Vec::with_capacity(2);
    if let Some(data) = strong {
        terms.push(Term {
            metric: SoftMetric::Accuracy,
            weight: 1.0,
            data,
        });
    }
    match weak {
        Some(data) if cfg.lambda > 0.0 => terms.push(Term {
            metric: weak_metric(cfg.mode),
            weight: cfg.lambda,
            data,
        }),
        Some(_) => {}
        None if cfg.lambda > 0.0 => {
            return Err(config_err!("lambda = {} needs a weakly labeled set", cfg.lambda))
        }
        None => {}
    }
    if terms.is_empty() {
        return Err(config_err!("objective needs a strong set, a weak set, or both"));
    }
    Ok(terms)
}

/// `softmax-max_γ [O_s(γ) + λ·O_g(γ)]`.
///
/// `strong = None` drops the strong term (only-weak training). The weak set
/// is ignored when `λ = 0` and required otherwise.
pub fn combined_objective(
    strong: Option<LabeledScores<'_>>,
    weak: Option<LabeledScores<'_>>,
    cfg: &ObjectiveConfig,
) -> Result<GridObjective> {
    let terms = combined_terms(strong, weak, cfg)?;
    Ok(grid_objective(&terms, cfg.sharpness, &cfg.gamma_grid, cfg.temperature, false)?.0)
}

/// Combined objective together with its gradient w.r.t. every score.
pub fn objective_with_gradient(
    strong: Option<LabeledScores<'_>>,
    weak: Option<LabeledScores<'_>>,
    cfg: &ObjectiveConfig,
) -> Result<(GridObjective, ScoreGradients)> {
    let terms = combined_terms(strong, weak, cfg)?;
    let (objective, grads) = grid_objective(&terms, cfg.sharpness, &cfg.gamma_grid, cfg.temperature, true)?;
    let mut grads = grads.unwrap_or_default().into_iter();
    let strong_grad = match strong {
        Some(_) => grads.next().unwrap_or_default(),
        None => Vec::new(),
    };
    let weak_grad = match (weak, grads.next()) {
        (Some(_), Some(g)) => g,
        (Some(w), None) => vec![0.0; w.scores.len()],
        (None, _) => Vec::new(),
    };
    Ok((
        objective,
        ScoreGradients {
            strong: strong_grad,
            weak: weak_grad,
        },
    ))
}

/// `∂(combined objective)/∂f(x_i)` for every strong and weak instance.
pub fn d_objective_d_scores(
    strong: Option<LabeledScores<'_>>,
    weak: Option<LabeledScores<'_>>,
    cfg: &ObjectiveConfig,
) -> Result<ScoreGradients> {
    Ok(objective_with_gradient(strong, weak, cfg)?.1)
}
