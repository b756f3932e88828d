//! Class-conditional noise diagnostics for group labels used as instance labels.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{config_err, Error, Result};
use crate::math;
use crate::model::ScorerSpec;
use crate::train::{self, TrainConfig};

/// `alpha = Pr(g=0 | y=1)`, `beta = Pr(g=1 | y=0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRates {
    pub alpha: f64,
    pub beta: f64,
}

impl NoiseRates {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(config_err!("noise rates must lie in [0, 1], got ({alpha}, {beta})"));
        }
        Ok(NoiseRates { alpha, beta })
    }
}

/// Exact rates by counting instances that carry both `y` and `g`.
pub fn true_noise_rates(ds: &Dataset) -> Result<NoiseRates> {
    let y = ds.true_labels()?;
    let g = ds.group_labels()?;
    let (mut pos, mut neg, mut pos_in_neg_groups, mut neg_in_pos_groups) = (0usize, 0usize, 0usize, 0usize);
    for (&yi, &gi) in y.iter().zip(&g) {
        if yi {
            pos += 1;
            pos_in_neg_groups += usize::from(!gi);
        } else {
            neg += 1;
            neg_in_pos_groups += usize::from(gi);
        }
    }
    if pos == 0 {
        return Err(Error::EmptyClass(1));
    }
    if neg == 0 {
        return Err(Error::EmptyClass(0));
    }
    Ok(NoiseRates {
        alpha: pos_in_neg_groups as f64 / pos as f64,
        beta: neg_in_pos_groups as f64 / neg as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCheck {
    /// `alpha + beta < 1`: the noisy label is better than random.
    pub holds: bool,
    /// `1 − alpha − beta`.
    pub margin: f64,
}

pub fn check_ccn_assumptions(rates: NoiseRates) -> AssumptionCheck {
    let margin = 1.0 - rates.alpha - rates.beta;
    AssumptionCheck {
        holds: margin > 0.0,
        margin,
    }
}

/// Default fraction of weak instances used to estimate `β`.
pub const DEFAULT_QUANTILE: f64 = 0.05;
/// Default epoch budget of the strong-only scorer used for estimation.
pub const DEFAULT_ESTIMATION_EPOCHS: usize = 200;

/// Fraction of `g = 1` among the `⌈quantile·N⌉` lowest-scoring instances
/// (stable on ties).
pub fn beta_from_scores(scores: &[f64], g: &[bool], quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(config_err!("quantile must lie in (0, 1), got {quantile}"));
    }
    if scores.len() != g.len() {
        return Err(Error::Shape(alloc::format!("{} scores for {} labels", scores.len(), g.len())));
    }
    let take = math::ceil(quantile * scores.len() as f64) as usize;
    if take == 0 {
        return Err(config_err!("too few weak instances to estimate beta"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let flagged = order[..take].iter().filter(|&&i| g[i]).count();
    Ok(flagged as f64 / take as f64)
}

/// Estimates `β = Pr(g=1 | y=0)`: train a scorer on the strong set alone,
/// take the weak instances it considers least likely to be positive, and
/// report how many of them nevertheless sit in positive groups.
pub fn estimate_beta(
    strong: &Dataset,
    weak: &Dataset,
    spec: &ScorerSpec,
    cfg: &TrainConfig,
    quantile: f64,
) -> Result<f64> {
    let g = weak.group_labels()?;
    if weak.is_empty() {
        return Err(config_err!("too few weak instances to estimate beta"));
    }
    let model = train::train_only_strong(strong, spec, cfg)?;
    let scores = model.scores(weak)?;
    beta_from_scores(&scores, &g, quantile)
}
