//! Synthetic data: Gaussian-mixture instances, labeled groups of controlled
//! purity, skew subsampling by whole groups, and exact class-conditional
//! label noise.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, GroupTable, Instance};
use crate::error::{config_err, Error, Result};
use crate::math;
use crate::rng::{self, stream, ChaCha8Rng};

/// An isotropic Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mean: Vec<f64>,
    pub std: f64,
}

/// Class-conditional mixtures. Each draw picks a component of its class
/// uniformly at random, then samples from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    pub positive: Vec<Component>,
    pub negative: Vec<Component>,
}

impl GaussianMixtureSpec {
    /// Positives from means (1,1) and (3,3), negatives from (0,0), unit std.
    pub fn purity_default() -> Self {
        GaussianMixtureSpec {
            positive: alloc::vec![
                Component {
                    mean: alloc::vec![1.0, 1.0],
                    std: 1.0,
                },
                Component {
                    mean: alloc::vec![3.0, 3.0],
                    std: 1.0,
                },
            ],
            negative: alloc::vec![Component {
                mean: alloc::vec![0.0, 0.0],
                std: 1.0,
            }],
        }
    }

    /// One unit-variance Gaussian per class, means `separation` apart along
    /// the diagonal of `dim` dimensions.
    pub fn two_gaussians(dim: usize, separation: f64) -> Self {
        let offset = separation / math::sqrt(dim as f64);
        GaussianMixtureSpec {
            positive: alloc::vec![Component {
                mean: alloc::vec![offset; dim],
                std: 1.0,
            }],
            negative: alloc::vec![Component {
                mean: alloc::vec![0.0; dim],
                std: 1.0,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.positive.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.positive.is_empty() || self.negative.is_empty() {
            return Err(config_err!("each class needs at least one component"));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(config_err!("component means must be non-empty"));
        }
        for c in self.positive.iter().chain(&self.negative) {
            if c.mean.len() != dim {
                return Err(config_err!("component means disagree on dimensionality"));
            }
            if !(c.std > 0.0 && c.std.is_finite()) || c.mean.iter().any(|m| !m.is_finite()) {
                return Err(config_err!("component std must be positive and means finite"));
            }
        }
        Ok(())
    }
}

/// Draws labeled instances class by class from independent streams.
struct Sampler<'a> {
    spec: &'a GaussianMixtureSpec,
    pos: ChaCha8Rng,
    neg: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a GaussianMixtureSpec, seed: u64) -> Self {
        Sampler {
            spec,
            pos: rng::rng(rng::derive_seed(seed, stream::POSITIVE)),
            neg: rng::rng(rng::derive_seed(seed, stream::NEGATIVE)),
        }
    }

    fn draw(&mut self, positive: bool) -> Instance {
        let (components, r) = if positive {
            (&self.spec.positive, &mut self.pos)
        } else {
            (&self.spec.negative, &mut self.neg)
        };
        let c = &components[r.random_range(0..components.len())];
        let features = c
            .mean
            .iter()
            .map(|&m| {
                // validated: std > 0 and finite
                Normal::new(m, c.std).map_or(m, |n| n.sample(r))
            })
            .collect();
        Instance::new(features).with_label(positive)
    }
}

/// `n_pos` positive then `n_neg` negative instances with true labels and no groups.
pub fn sample_instances(spec: &GaussianMixtureSpec, n_pos: usize, n_neg: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut sampler = Sampler::new(spec, seed);
    let mut instances = Vec::with_capacity(n_pos + n_neg);
    instances.extend((0..n_pos).map(|_| sampler.draw(true)));
    instances.extend((0..n_neg).map(|_| sampler.draw(false)));
    Dataset::new(spec.dim(), instances)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurityConfig {
    /// Fraction of positive instances inside each positive group.
    pub purity: f64,
    pub group_size: usize,
    pub n_pos_groups: usize,
    pub n_neg_groups: usize,
    pub seed: u64,
}

impl PurityConfig {
    pub fn new(purity: f64, n_groups: usize, seed: u64) -> Self {
        PurityConfig {
            purity,
            group_size: 20,
            n_pos_groups: n_groups,
            n_neg_groups: n_groups,
            seed,
        }
    }

    /// Positive instances per positive group.
    pub fn positives_per_group(&self) -> Result<usize> {
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(config_err!("purity {} outside (0, 1]", self.purity));
        }
        if self.group_size == 0 || self.n_pos_groups == 0 || self.n_neg_groups == 0 {
            return Err(config_err!("group size and group counts must be positive"));
        }
        let exact = self.purity * self.group_size as f64;
        let count = math::round(exact);
        if math::abs(exact - count) > 1e-9 {
            return Err(config_err!(
                "purity {} times group size {} = {exact} is not an integer count",
                self.purity,
                self.group_size
            ));
        }
        Ok(count as usize)
    }
}

/// Weakly labeled groups: `n_pos_groups` groups labeled 1 holding
/// `purity·group_size` positives plus negatives, then `n_neg_groups` groups
/// labeled 0 of negatives only. Group ids count up from 0 in that order.
pub fn gen_purity_dataset(cfg: &PurityConfig, spec: &GaussianMixtureSpec) -> Result<(Dataset, GroupTable)> {
    let k = cfg.positives_per_group()?;
    spec.validate()?;
    let mut sampler = Sampler::new(spec, cfg.seed);
    let total = (cfg.n_pos_groups + cfg.n_neg_groups) * cfg.group_size;
    let mut instances = Vec::with_capacity(total);
    for g in 0..cfg.n_pos_groups {
        for j in 0..cfg.group_size {
            instances.push(sampler.draw(j < k).with_group(g as u64, true));
        }
    }
    for g in 0..cfg.n_neg_groups {
        let id = (cfg.n_pos_groups + g) as u64;
        for _ in 0..cfg.group_size {
            instances.push(sampler.draw(false).with_group(id, false));
        }
    }
    let ds = Dataset::new(spec.dim(), instances)?;
    let gt = GroupTable::from_dataset(&ds)?;
    Ok((ds, gt))
}

/// Adds class-conditional noisy labels: `y=1` becomes `g=0` with probability
/// `alpha`, `y=0` becomes `g=1` with probability `beta`. Each instance gets
/// its own singleton group (id = index) carrying the noisy label.
pub fn inject_ccn_noise(ds: &Dataset, alpha: f64, beta: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&alpha) || !(0.0..1.0).contains(&beta) {
        return Err(config_err!("noise rates must lie in [0, 1), got ({alpha}, {beta})"));
    }
    let labels = ds.true_labels()?;
    let mut r = rng::rng(rng::derive_seed(seed, stream::NOISE));
    let instances = ds
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (inst, y))| {
            let u: f64 = r.random();
            let g = if y { u >= alpha } else { u < beta };
            Instance {
                group_id: Some(i as u64),
                group_label: Some(g),
                ..inst.clone()
            }
        })
        .collect();
    Dataset::new(ds.dim(), instances)
}

/// Positive and negative counts of a set of instance indices.
fn tally(ds: &Dataset, labels: &[bool], members: &[usize]) -> (usize, usize) {
    debug_assert_eq!(ds.len(), labels.len());
    let pos = members.iter().filter(|&&m| labels[m]).count();
    (pos, members.len() - pos)
}

/// Drops whole groups that contain positives, in seeded random order, until
/// `#neg/#pos` reaches `target_skew`. The result is within one group of the
/// target: of the last two candidate states the one closer to it is kept.
/// Ungrouped instances count as singleton groups.
pub fn subsample_skew(ds: &Dataset, gt: &GroupTable, target_skew: f64, seed: u64) -> Result<(Dataset, GroupTable)> {
    if !(target_skew >= 1.0 && target_skew.is_finite()) {
        return Err(config_err!("target skew must be a finite number >= 1, got {target_skew}"));
    }
    gt.validate(ds)?;
    let labels = ds.true_labels()?;

    // Units: groups by id, then ungrouped instances.
    let mut units: Vec<Vec<usize>> = gt.iter().map(|(_, g)| g.members.clone()).collect();
    units.extend((0..ds.len()).filter(|&i| ds.instances()[i].group_id.is_none()).map(|i| alloc::vec![i]));

    let counts: Vec<(usize, usize)> = units.iter().map(|u| tally(ds, &labels, u)).collect();
    let (mut pos, mut neg) = counts.iter().fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    if pos == 0 {
        return Err(Error::EmptyClass(1));
    }
    let skew_of = |p: usize, n: usize| n as f64 / p as f64;
    let current = skew_of(pos, neg);
    let tol = 1e-9 * target_skew;
    if current >= target_skew - tol {
        if current - target_skew > tol {
            return Err(Error::UnreachableSkew {
                target: target_skew,
                max_achievable: current,
            });
        }
        return Ok((ds.clone(), gt.clone()));
    }

    let removable: Vec<usize> = (0..units.len()).filter(|&u| counts[u].0 > 0).collect();
    // Best achievable: keep only the positive unit giving the highest skew.
    let neg_in_removable: usize = removable.iter().map(|&u| counts[u].1).sum();
    let max_achievable = removable
        .iter()
        .map(|&u| skew_of(counts[u].0, neg - neg_in_removable + counts[u].1))
        .fold(0.0, f64::max);
    if max_achievable < target_skew - tol {
        return Err(Error::UnreachableSkew {
            target: target_skew,
            max_achievable,
        });
    }

    let mut order = removable.clone();
    order.shuffle(&mut rng::rng(rng::derive_seed(seed, stream::SHUFFLE)));
    // The unit with the best stand-alone skew goes last, so the target is
    // always reached before the final positives would have to go.
    let alone = |u: usize| skew_of(counts[u].0, neg - neg_in_removable + counts[u].1);
    let best_at = (0..order.len())
        .fold(0, |best, i| if alone(order[i]) > alone(order[best]) { i } else { best });
    order.remove(best_at);

    let mut removed = alloc::vec![false; units.len()];
    let mut last = None;
    for &u in &order {
        if skew_of(pos, neg) >= target_skew - tol {
            break;
        }
        let (p, n) = counts[u];
        removed[u] = true;
        pos -= p;
        neg -= n;
        last = Some(u);
    }
    if let Some(u) = last {
        // Undo the final removal if that lands closer to the target.
        let (p, n) = counts[u];
        let before = skew_of(pos + p, neg + n);
        if math::abs(before - target_skew) < math::abs(skew_of(pos, neg) - target_skew) {
            removed[u] = false;
        }
    }

    let mut keep: Vec<usize> = units
        .iter()
        .enumerate()
        .filter(|(u, _)| !removed[*u])
        .flat_map(|(_, m)| m.iter().copied())
        .collect();
    keep.sort_unstable();
    let out = ds.subset(&keep)?;
    let table = GroupTable::from_dataset(&out)?;
    Ok((out, table))
}
