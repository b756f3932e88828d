//! Training loops for the joint objective and its baselines.
//!
//! Every method runs the same fitter: gradient *ascent* on a smoothed
//! grid objective, full batch by default, optional momentum. Methods differ
//! only in which instances feed the objective and how:
//!
//! | method            | strong term | weak term                        |
//! |-------------------|-------------|----------------------------------|
//! | `Weasl`           | accuracy    | `λ ·` accuracy or G surrogate    |
//! | `OnlyStrong`      | accuracy    | none                             |
//! | `OnlyWeak`        | none        | accuracy or G surrogate          |
//! | `MilBalanced`     | none        | accuracy of mean group scores    |
//! | `MilImbalanced`   | none        | soft F-measure of group scores   |
//!
//! The prediction threshold of a trained model is the grid `γ` with the
//! largest objective at the final parameters.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{Dataset, GroupTable};
use crate::error::{config_err, Error, Result};
use crate::eval;
use crate::math;
use crate::model::{self, ForwardPass, Mode, ScorerParams, ScorerSpec};
use crate::objective::{self, GridObjective, LabeledScores, ObjectiveConfig, SoftMetric, Term, WeakMode};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Weasl,
    OnlyStrong,
    OnlyWeak,
    MilBalanced,
    MilImbalanced,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Weasl,
        Method::OnlyStrong,
        Method::OnlyWeak,
        Method::MilBalanced,
        Method::MilImbalanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Weasl => "weasl",
            Method::OnlyStrong => "only_strong",
            Method::OnlyWeak => "only_weak",
            Method::MilBalanced => "mil_balanced",
            Method::MilImbalanced => "mil_imbalanced",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn uses_strong(self) -> bool {
        matches!(self, Method::Weasl | Method::OnlyStrong)
    }

    pub fn uses_weak(self) -> bool {
        !matches!(self, Method::OnlyStrong)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch {
    Full,
    /// Approximate minibatches of about this many instances. The G surrogate
    /// is a ratio, so per-batch values only approximate the full objective.
    Size(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 gives plain gradient ascent.
    pub momentum: f64,
    pub epochs: usize,
    pub batch: Batch,
    pub seed: u64,
    /// Candidates for the weak-term weight, picked by cross-validation.
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub method: Method,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: ObjectiveConfig::default(),
            learning_rate: 0.5,
            momentum: 0.0,
            epochs: 300,
            batch: Batch::Full,
            seed: 0,
            lambda_grid: vec![1.0, 10.0, 100.0],
            folds: 3,
            method: Method::Weasl,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err!("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(config_err!("momentum must lie in [0, 1)"));
        }
        if self.epochs == 0 {
            return Err(config_err!("epochs must be at least 1"));
        }
        if self.batch == Batch::Size(0) {
            return Err(config_err!("batch size must be positive"));
        }
        if self.folds < 2 {
            return Err(config_err!("cross-validation needs at least 2 folds"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(config_err!("lambda grid values must be finite and non-negative"));
        }
        Ok(())
    }
}

/// What produced a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub method: Method,
    pub seed: u64,
    /// Weak-term weight actually used (`None` for MIL).
    pub lambda: Option<f64>,
    pub beta_hat: Option<f64>,
    /// Smoothed objective at the final parameters.
    pub objective_value: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub sharpness: f64,
    pub temperature: f64,
    pub grid_size: usize,
    /// Free-form notes, one `key=value` per entry.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ScorerSpec,
    pub params: ScorerParams,
    pub threshold: f64,
    pub provenance: Provenance,
    /// Objective value at every optimizer step.
    pub trace: Vec<f64>,
}

impl TrainedModel {
    pub fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.dim() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                got: ds.dim(),
            });
        }
        model::predict_scores(&self.spec, &self.params, &ds.features())
    }

    /// Hard predictions `f(x) > threshold`.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<bool>> {
        Ok(self.scores(ds)?.into_iter().map(|s| s > self.threshold).collect())
    }
}

/// The instances one fit sees. Weak-set group structure is only used by MIL.
#[derive(Debug, Clone)]
struct Problem<'a> {
    strong: Vec<(&'a [f64], bool)>,
    weak: Vec<(&'a [f64], bool)>,
    /// Member positions into `weak`, for group-level objectives.
    groups: Option<Vec<Vec<usize>>>,
}

impl<'a> Problem<'a> {
    fn features(&self) -> Vec<&'a [f64]> {
        self.strong.iter().chain(&self.weak).map(|(x, _)| *x).collect()
    }

    fn minibatches(&self, size: usize, seed: u64) -> Vec<Problem<'a>> {
        let mut r = rng::rng(seed);
        match &self.groups {
            None => {
                let total = self.strong.len() + self.weak.len();
                let mut n = total.div_ceil(size).max(1);
                for len in [self.strong.len(), self.weak.len()] {
                    if len > 0 {
                        n = n.min(len);
                    }
                }
                let mut s_idx: Vec<usize> = (0..self.strong.len()).collect();
                let mut w_idx: Vec<usize> = (0..self.weak.len()).collect();
                s_idx.shuffle(&mut r);
                w_idx.shuffle(&mut r);
                (0..n)
                    .map(|b| Problem {
                        strong: chunk(&s_idx, b, n).iter().map(|&i| self.strong[i]).collect(),
                        weak: chunk(&w_idx, b, n).iter().map(|&i| self.weak[i]).collect(),
                        groups: None,
                    })
                    .collect()
            }
            Some(groups) => {
                let n = self.weak.len().div_ceil(size).clamp(1, groups.len());
                let mut g_idx: Vec<usize> = (0..groups.len()).collect();
                g_idx.shuffle(&mut r);
                (0..n)
                    .map(|b| {
                        let mut weak = Vec::new();
                        let mut sub_groups = Vec::new();
                        for &g in chunk(&g_idx, b, n) {
                            let start = weak.len();
                            weak.extend(groups[g].iter().map(|&m| self.weak[m]));
                            sub_groups.push((start..weak.len()).collect());
                        }
                        Problem {
                            strong: Vec::new(),
                            weak,
                            groups: Some(sub_groups),
                        }
                    })
                    .collect()
            }
        }
    }
}

fn chunk<T>(items: &[T], b: usize, n: usize) -> &[T] {
    &items[b * items.len() / n..(b + 1) * items.len() / n]
}

/// How scores of a [`Problem`] become an objective.
#[derive(Debug, Clone)]
enum Goal {
    Combined(ObjectiveConfig),
    Groups {
        metric: SoftMetric,
        sharpness: f64,
        grid: Vec<f64>,
        temperature: f64,
    },
}

impl Goal {
    fn grid(&self) -> &[f64] {
        match self {
            Goal::Combined(cfg) => &cfg.gamma_grid,
            Goal::Groups { grid, .. } => grid,
        }
    }

    /// Objective and, when asked, its gradient w.r.t. `scores`
    /// (strong instances first, then weak).
    fn evaluate(&self, problem: &Problem<'_>, scores: &[f64], with_gradient: bool) -> Result<(GridObjective, Vec<f64>)> {
        let (strong_scores, weak_scores) = scores.split_at(problem.strong.len());
        match self {
            Goal::Combined(cfg) => {
                let y: Vec<bool> = problem.strong.iter().map(|p| p.1).collect();
                let g: Vec<bool> = problem.weak.iter().map(|p| p.1).collect();
                let strong = if y.is_empty() {
                    None
                } else {
                    Some(LabeledScores::new(strong_scores, &y)?)
                };
                let weak = if g.is_empty() {
                    None
                } else {
                    Some(LabeledScores::new(weak_scores, &g)?)
                };
                if with_gradient {
                    let (obj, grads) = objective::objective_with_gradient(strong, weak, cfg)?;
                    let mut out = grads.strong;
                    out.extend(grads.weak);
                    Ok((obj, out))
                } else {
                    Ok((objective::combined_objective(strong, weak, cfg)?, Vec::new()))
                }
            }
            Goal::Groups {
                metric,
                sharpness,
                grid,
                temperature,
            } => {
                let groups = problem
                    .groups
                    .as_ref()
                    .ok_or_else(|| config_err!("group objective without groups"))?;
                let means: Vec<f64> = groups
                    .iter()
                    .map(|m| m.iter().map(|&i| weak_scores[i]).sum::<f64>() / m.len() as f64)
                    .collect();
                let labels: Vec<bool> = groups.iter().map(|m| problem.weak[m[0]].1).collect();
                let term = Term {
                    metric: *metric,
                    weight: 1.0,
                    data: LabeledScores::new(&means, &labels)?,
                };
                let (obj, grads) = objective::grid_objective(&[term], *sharpness, grid, *temperature, with_gradient)?;
                let mut out = Vec::new();
                if let Some(grads) = grads {
                    out = vec![0.0; scores.len()];
                    let offset = problem.strong.len();
                    for (members, &g) in groups.iter().zip(&grads[0]) {
                        let share = g / members.len() as f64;
                        for &i in members {
                            out[offset + i] = share;
                        }
                    }
                }
                Ok((obj, out))
            }
        }
    }
}

struct Fit {
    params: ScorerParams,
    objective: GridObjective,
    threshold: f64,
    trace: Vec<f64>,
}

fn fit(spec: &ScorerSpec, problem: &Problem<'_>, goal: &Goal, cfg: &TrainConfig) -> Result<Fit> {
    spec.validate()?;
    cfg.validate()?;
    if problem.strong.is_empty() && problem.weak.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = model::init_params(spec, cfg.seed)?;
    let mut velocity = vec![0.0; params.len()];
    let dropout_seed = rng::derive_seed(cfg.seed, stream::DROPOUT);
    let shuffle_seed = rng::derive_seed(cfg.seed, stream::SHUFFLE);
    let mut trace = Vec::with_capacity(cfg.epochs);

    let full = [problem.clone()];
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        let batches = match cfg.batch {
            Batch::Full => None,
            Batch::Size(n) => Some(problem.minibatches(n, rng::derive_seed(shuffle_seed, epoch as u64))),
        };
        for sub in batches.as_deref().unwrap_or(&full) {
            let features = sub.features();
            let mode = if spec.dropout_rate > 0.0 {
                Mode::Train {
                    seed: rng::derive_seed(dropout_seed, step),
                }
            } else {
                Mode::Eval
            };
            step += 1;
            let pass = ForwardPass::run(spec, &params, &features, mode)?;
            let (obj, upstream) = goal.evaluate(sub, pass.scores(), true)?;
            let grad = pass.backward(&params, &upstream)?;
            let norm = math::sqrt(grad.iter().map(|g| g * g).sum());
            if !obj.value.is_finite() || !norm.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    per_gamma: obj.per_gamma,
                    grad_norm: norm,
                });
            }
            trace.push(obj.value);
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = cfg.momentum * *v + g;
            }
            params.add_scaled(cfg.learning_rate, &velocity);
        }
    }

    let features = problem.features();
    let scores = model::predict_scores(spec, &params, &features)?;
    let (objective, _) = goal.evaluate(problem, &scores, false)?;
    let threshold = goal.grid()[objective.argmax()];
    Ok(Fit {
        params,
        objective,
        threshold,
        trace,
    })
}

fn labeled<'a>(ds: &'a Dataset, labels: Vec<bool>) -> Vec<(&'a [f64], bool)> {
    ds.iter().map(|i| i.features.as_slice()).zip(labels).collect()
}

fn check_dim(spec: &ScorerSpec, ds: &Dataset) -> Result<()> {
    if ds.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: ds.dim(),
        });
    }
    Ok(())
}

fn beta_of(mode: WeakMode) -> Option<f64> {
    match mode {
        WeakMode::Balanced => None,
        WeakMode::Imbalanced { beta_hat } => Some(beta_hat),
    }
}

fn finish(spec: &ScorerSpec, cfg: &TrainConfig, method: Method, lambda: Option<f64>, beta_hat: Option<f64>, fit: Fit) -> TrainedModel {
    TrainedModel {
        spec: spec.clone(),
        params: fit.params,
        threshold: fit.threshold,
        provenance: Provenance {
            method,
            seed: cfg.seed,
            lambda,
            beta_hat,
            objective_value: fit.objective.value,
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            sharpness: cfg.objective.sharpness,
            temperature: cfg.objective.temperature,
            grid_size: cfg.objective.gamma_grid.len(),
            notes: Vec::new(),
        },
        trace: fit.trace,
    }
}

/// Fits the joint objective with a fixed `lambda`. With `lambda = 0` the weak
/// set never enters the computation.
pub fn train_weasl_with_lambda(
    strong: &Dataset,
    weak: &Dataset,
    spec: &ScorerSpec,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<TrainedModel> {
    check_dim(spec, strong)?;
    check_dim(spec, weak)?;
    if strong.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let objective = ObjectiveConfig {
        lambda,
        ..cfg.objective.clone()
    };
    let weak_used = lambda > 0.0;
    if weak_used && weak.is_empty() {
        return Err(config_err!("lambda = {lambda} needs a non-empty weak set"));
    }
    let problem = Problem {
        strong: labeled(strong, strong.true_labels()?),
        weak: if weak_used {
            labeled(weak, weak.group_labels()?)
        } else {
            Vec::new()
        },
        groups: None,
    };
    let beta = if weak_used { beta_of(objective.mode) } else { None };
    let fit = fit(spec, &problem, &Goal::Combined(objective), cfg)?;
    Ok(finish(spec, cfg, Method::Weasl, Some(lambda), beta, fit))
}

/// Joint training; `λ` is picked from `cfg.lambda_grid` by cross-validation
/// on the strong set (skipped when the grid has one value).
pub fn train_weasl(strong: &Dataset, weak: &Dataset, spec: &ScorerSpec, cfg: &TrainConfig) -> Result<TrainedModel> {
    let lambda = match cfg.lambda_grid.as_slice() {
        [] => return Err(config_err!("lambda grid is empty")),
        [only] => *only,
        _ => select_lambda(strong, weak, spec, cfg)?,
    };
    train_weasl_with_lambda(strong, weak, spec, cfg, lambda)
}

/// Strong-set accuracy alone.
pub fn train_only_strong(strong: &Dataset, spec: &ScorerSpec, cfg: &TrainConfig) -> Result<TrainedModel> {
    check_dim(spec, strong)?;
    if strong.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let problem = Problem {
        strong: labeled(strong, strong.true_labels()?),
        weak: Vec::new(),
        groups: None,
    };
    let objective = ObjectiveConfig {
        lambda: 0.0,
        ..cfg.objective.clone()
    };
    let fit = fit(spec, &problem, &Goal::Combined(objective), cfg)?;
    Ok(finish(spec, cfg, Method::OnlyStrong, Some(0.0), None, fit))
}

/// The weak-set surrogate alone, i.e. the joint objective with the strong
/// term removed and `λ = 1`.
pub fn train_only_weak(weak: &Dataset, spec: &ScorerSpec, cfg: &TrainConfig) -> Result<TrainedModel> {
    check_dim(spec, weak)?;
    if weak.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let problem = Problem {
        strong: Vec::new(),
        weak: labeled(weak, weak.group_labels()?),
        groups: None,
    };
    let objective = ObjectiveConfig {
        lambda: 1.0,
        ..cfg.objective.clone()
    };
    let beta = beta_of(objective.mode);
    let fit = fit(spec, &problem, &Goal::Combined(objective), cfg)?;
    Ok(finish(spec, cfg, Method::OnlyWeak, Some(1.0), beta, fit))
}

/// Group-level target optimized by MIL.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMetric {
    Accuracy,
    FMeasure,
}

/// Multiple-instance learning with mean aggregation: a group's score is the
/// mean of its members' scores, thresholded softly at `γ` and scored against
/// the group label. The instance-level scorer and learned `γ` are returned.
pub fn train_mil(
    weak: &Dataset,
    gt: &GroupTable,
    spec: &ScorerSpec,
    cfg: &TrainConfig,
    group_metric: GroupMetric,
) -> Result<TrainedModel> {
    check_dim(spec, weak)?;
    gt.validate(weak)?;
    if gt.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut members_out = Vec::with_capacity(gt.len());
    let mut weak_list = Vec::new();
    for (id, group) in gt.iter() {
        if group.members.is_empty() {
            return Err(Error::InconsistentGroup {
                group_id: id,
                reason: "group has no members".into(),
            });
        }
        let start = weak_list.len();
        weak_list.extend(group.members.iter().map(|&m| (weak.instances()[m].features.as_slice(), group.label)));
        members_out.push((start..weak_list.len()).collect());
    }
    let problem = Problem {
        strong: Vec::new(),
        weak: weak_list,
        groups: Some(members_out),
    };
    let (metric, method) = match group_metric {
        GroupMetric::Accuracy => (SoftMetric::Accuracy, Method::MilBalanced),
        GroupMetric::FMeasure => (SoftMetric::FMeasure, Method::MilImbalanced),
    };
    let goal = Goal::Groups {
        metric,
        sharpness: cfg.objective.sharpness,
        grid: cfg.objective.gamma_grid.clone(),
        temperature: cfg.objective.temperature,
    };
    let fit = fit(spec, &problem, &goal, cfg)?;
    Ok(finish(spec, cfg, method, None, None, fit))
}

/// Trains `cfg.method`. `groups` is needed for the MIL methods only.
pub fn train(
    strong: &Dataset,
    weak: &Dataset,
    groups: Option<&GroupTable>,
    spec: &ScorerSpec,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    match cfg.method {
        Method::Weasl => train_weasl(strong, weak, spec, cfg),
        Method::OnlyStrong => train_only_strong(strong, spec, cfg),
        Method::OnlyWeak => train_only_weak(weak, spec, cfg),
        Method::MilBalanced | Method::MilImbalanced => {
            let built;
            let gt = match groups {
                Some(gt) => gt,
                None => {
                    built = GroupTable::from_dataset(weak)?;
                    &built
                }
            };
            let metric = if cfg.method == Method::MilBalanced {
                GroupMetric::Accuracy
            } else {
                GroupMetric::FMeasure
            };
            train_mil(weak, gt, spec, cfg, metric)
        }
    }
}

/// Stratified fold assignment: seeded shuffle, positives then negatives,
/// dealt round-robin.
fn fold_assignment(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng::rng(rng::derive_seed(seed, stream::FOLDS)));
    order.sort_by_key(|&i| !labels[i]);
    let mut fold = vec![0; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Picks `λ` from `cfg.lambda_grid` by k-fold cross-validation on the strong
/// set: each candidate is trained on the other folds plus the whole weak set
/// and scored on the held-out fold (accuracy in balanced mode, F-measure in
/// imbalanced mode). The best mean wins; ties go to the smaller `λ`, then to
/// the earlier grid entry. Fewer than `k` strong instances fall back to
/// leave-one-out.
pub fn select_lambda(strong: &Dataset, weak: &Dataset, spec: &ScorerSpec, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    match cfg.lambda_grid.as_slice() {
        [] => return Err(config_err!("lambda grid is empty")),
        [only] => return Ok(*only),
        _ => {}
    }
    let labels = strong.true_labels()?;
    if labels.len() < 2 {
        return Err(config_err!("cross-validation needs at least 2 strong instances, got {}", labels.len()));
    }
    let folds = cfg.folds.min(labels.len());
    let assignment = fold_assignment(&labels, folds, cfg.seed);
    let imbalanced = matches!(cfg.objective.mode, WeakMode::Imbalanced { .. });

    let mut best: Option<(f64, f64)> = None;
    for &lambda in &cfg.lambda_grid {
        let mut scores = Vec::with_capacity(folds);
        for k in 0..folds {
            let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != k).collect();
            let test_idx: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == k).collect();
            let model = train_weasl_with_lambda(&strong.subset(&train_idx)?, weak, spec, cfg, lambda)?;
            let held_out = strong.subset(&test_idx)?;
            let report = eval::evaluate(&model, &held_out)?;
            scores.push(if imbalanced { report.f_measure } else { report.accuracy });
        }
        let mean = math::mean(&scores);
        let better = match best {
            None => true,
            Some((b_lambda, b_mean)) => mean > b_mean || (mean == b_mean && lambda < b_lambda),
        };
        if better {
            best = Some((lambda, mean));
        }
    }
    best.map(|(l, _)| l).ok_or_else(|| config_err!("no lambda evaluated"))
}

/// Human-readable one-liner for logs.
pub fn describe(model: &TrainedModel) -> String {
    format!(
        "method={} lambda={:?} threshold={} objective={}",
        model.provenance.method, model.provenance.lambda, model.threshold, model.provenance.objective_value
    )
}
