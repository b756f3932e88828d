//! Synthetic experiment sweeps.
//!
//! A sweep is a grid of cells `(sweep value, seed, scorer, method)`. For each
//! `(value, seed)` one set of datasets is generated and shared by every method
//! trained on it, so methods are compared on identical splits. Cells run in
//! parallel; results come back in grid order, so output files do not depend
//! on scheduling.
//!
//! Data protocols (mixture: positives at (1,1) and (3,3), negatives at (0,0),
//! unit variance):
//!
//! | experiment           | x            | weak set                 | strong set          | test set                    |
//! |----------------------|--------------|--------------------------|---------------------|-----------------------------|
//! | `purity_sweep`       | purity f     | purity groups at f       | `strong` balanced   | purity groups at f, no g    |
//! | `skew_sweep`         | skew         | purity groups, subsampled| `strong` balanced   | purity groups, subsampled   |
//! | `strong_count_sweep` | strong count | purity groups            | x balanced          | `test_size` balanced        |
//! | `complexity_compare` | strong count | purity groups            | x balanced          | `test_size` balanced        |
//! | `baseline_compare`   | purity f     | purity groups at f       | `strong` balanced   | purity groups at f, no g    |
//!
//! Strong sets for different counts under one seed are nested.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use weasl_core::data::{Dataset, GroupTable};
use weasl_core::eval::{self, MetricsReport};
use weasl_core::model::{Activation, ScorerKind, ScorerSpec};
use weasl_core::noise::{self, NoiseRates};
use weasl_core::objective::WeakMode;
use weasl_core::rng::derive_seed;
use weasl_core::synth::{self, GaussianMixtureSpec, PurityConfig};
use weasl_core::train::{self, Batch, Method, TrainConfig, TrainedModel};

use crate::error::{Error, Result};
use crate::kv::{self, Pairs};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PuritySweep,
    SkewSweep,
    StrongCountSweep,
    ComplexityCompare,
    BaselineCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::PuritySweep,
        ExperimentKind::SkewSweep,
        ExperimentKind::StrongCountSweep,
        ExperimentKind::ComplexityCompare,
        ExperimentKind::BaselineCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PuritySweep => "purity_sweep",
            ExperimentKind::SkewSweep => "skew_sweep",
            ExperimentKind::StrongCountSweep => "strong_count_sweep",
            ExperimentKind::ComplexityCompare => "complexity_compare",
            ExperimentKind::BaselineCompare => "baseline_compare",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Axis label of the sweep value.
    pub fn x_label(self) -> &'static str {
        match self {
            ExperimentKind::PuritySweep | ExperimentKind::BaselineCompare => "purity",
            ExperimentKind::SkewSweep => "skew",
            ExperimentKind::StrongCountSweep | ExperimentKind::ComplexityCompare => "strong_count",
        }
    }

    /// Metric plotted for this experiment.
    pub fn metric(self) -> &'static str {
        match self {
            ExperimentKind::StrongCountSweep | ExperimentKind::ComplexityCompare => "accuracy",
            _ => "f_measure",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where `β̂` for the imbalanced weak term comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSource {
    /// `estimate_beta` on each split.
    Auto,
    Fixed(f64),
    /// The generator's ground truth (oracle runs only).
    True,
}

impl BetaSource {
    pub fn parse(raw: &str) -> Result<Self> {
        match raw {
            "auto" => Ok(BetaSource::Auto),
            "true" => Ok(BetaSource::True),
            _ => raw
                .parse::<f64>()
                .ok()
                .filter(|b| (0.0..1.0).contains(b))
                .map(BetaSource::Fixed)
                .ok_or_else(|| Error::Config(format!("beta must be auto, true or a number in [0, 1), got `{raw}`"))),
        }
    }
}

impl std::fmt::Display for BetaSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaSource::Auto => f.write_str("auto"),
            BetaSource::True => f.write_str("true"),
            BetaSource::Fixed(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub methods: Vec<Method>,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub jobs: usize,
    /// Purity of the weak groups when purity is not the swept value.
    pub purity: f64,
    /// Groups per class in the weak set.
    pub groups: usize,
    pub group_size: usize,
    /// Groups per class in purity-style test sets.
    pub test_groups: usize,
    /// Size of balanced test sets.
    pub test_size: usize,
    /// Strong-set size when it is not the swept value.
    pub strong: usize,
    pub imbalanced: bool,
    pub beta: BetaSource,
    pub quantile: f64,
    /// Epoch budget of the strong-only scorer behind `β̂`.
    pub beta_epochs: usize,
    /// Scorer for every cell (`complexity_compare` adds logistic regression).
    pub scorer: ScorerSpec,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn new(kind: ExperimentKind) -> Self {
        let (methods, values, imbalanced) = match kind {
            ExperimentKind::PuritySweep => (
                vec![Method::Weasl, Method::OnlyStrong, Method::MilBalanced, Method::MilImbalanced],
                vec![1.0, 0.8, 0.6, 0.4],
                true,
            ),
            ExperimentKind::SkewSweep => (
                vec![Method::Weasl, Method::OnlyStrong, Method::OnlyWeak],
                vec![2.0, 6.0, 12.0],
                true,
            ),
            ExperimentKind::StrongCountSweep => (
                vec![Method::Weasl, Method::OnlyStrong],
                vec![10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0],
                false,
            ),
            ExperimentKind::ComplexityCompare => {
                (vec![Method::Weasl, Method::OnlyStrong], vec![20.0, 200.0], false)
            }
            ExperimentKind::BaselineCompare => (Method::ALL.to_vec(), vec![0.6], true),
        };
        let scorer = match kind {
            ExperimentKind::ComplexityCompare => ScorerSpec::mlp(2, vec![128, 64], 0.5),
            _ => ScorerSpec::logistic(2),
        };
        let train = TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            lambda_grid: vec![10.0, 100.0],
            ..TrainConfig::default()
        };
        ExperimentConfig {
            kind,
            methods,
            values,
            seeds: (0..5).collect(),
            output_dir: PathBuf::from("results").join(kind.name()),
            jobs: 1,
            purity: 0.8,
            groups: 50,
            group_size: 20,
            test_groups: 50,
            test_size: 2000,
            strong: 20,
            imbalanced,
            beta: BetaSource::Auto,
            quantile: noise::DEFAULT_QUANTILE,
            beta_epochs: noise::DEFAULT_ESTIMATION_EPOCHS,
            scorer,
            train,
        }
    }

    /// Scorers every cell is trained with.
    pub fn scorers(&self) -> Vec<ScorerSpec> {
        match self.kind {
            ExperimentKind::ComplexityCompare if self.scorer.kind != ScorerKind::Logistic => {
                vec![ScorerSpec::logistic(2), self.scorer.clone()]
            }
            _ => vec![self.scorer.clone()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("no sweep values given".into()));
        }
        for &v in &self.values {
            let ok = match self.kind {
                ExperimentKind::PuritySweep | ExperimentKind::BaselineCompare => {
                    PurityConfig { purity: v, ..self.purity_config(0) }.positives_per_group().is_ok()
                }
                ExperimentKind::SkewSweep => v >= 1.0 && v.is_finite(),
                ExperimentKind::StrongCountSweep | ExperimentKind::ComplexityCompare => {
                    v >= 2.0 && v.fract() == 0.0 && v <= 1e7
                }
            };
            if !ok {
                return Err(Error::Config(format!("sweep value {v} is not valid for {}", self.kind)));
            }
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.strong < 2 {
            return Err(Error::Config("strong set needs at least 2 instances".into()));
        }
        if self.test_size < 2 || self.test_groups == 0 || self.groups == 0 || self.group_size == 0 {
            return Err(Error::Config("set sizes must be positive".into()));
        }
        self.purity_config(0).positives_per_group()?;
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::Config("quantile must lie in (0, 1)".into()));
        }
        if self.beta_epochs == 0 {
            return Err(Error::Config("beta_epochs must be at least 1".into()));
        }
        let mut probe = self.scorer.clone();
        probe.input_dim = 2;
        probe.validate()?;
        self.train.validate()?;
        Ok(())
    }

    fn purity_config(&self, seed: u64) -> PurityConfig {
        PurityConfig {
            purity: self.purity,
            group_size: self.group_size,
            n_pos_groups: self.groups,
            n_neg_groups: self.groups,
            seed,
        }
    }

    /// Every resolved setting as `key=value`, in a fixed order. Applying these
    /// pairs to `ExperimentConfig::new(kind)` reproduces `self`.
    pub fn to_pairs(&self) -> Pairs {
        let join = |v: Vec<String>| v.join(",");
        let t = &self.train;
        let mut p = Pairs::new();
        kv::push(&mut p, "experiment", self.kind);
        kv::push(&mut p, "methods", join(self.methods.iter().map(|m| m.to_string()).collect()));
        kv::push(&mut p, "values", join(self.values.iter().map(|v| v.to_string()).collect()));
        kv::push(&mut p, "seeds", join(self.seeds.iter().map(|v| v.to_string()).collect()));
        kv::push(&mut p, "output_dir", self.output_dir.display());
        kv::push(&mut p, "purity", self.purity);
        kv::push(&mut p, "groups", self.groups);
        kv::push(&mut p, "group_size", self.group_size);
        kv::push(&mut p, "test_groups", self.test_groups);
        kv::push(&mut p, "test_size", self.test_size);
        kv::push(&mut p, "strong", self.strong);
        kv::push(&mut p, "mode", if self.imbalanced { "imbalanced" } else { "balanced" });
        kv::push(&mut p, "beta", self.beta);
        kv::push(&mut p, "quantile", self.quantile);
        kv::push(&mut p, "beta_epochs", self.beta_epochs);
        for (k, v) in scorer_pairs(&self.scorer) {
            kv::push(&mut p, &k, v);
        }
        for (k, v) in train_pairs(t) {
            kv::push(&mut p, &k, v);
        }
        p
    }

    /// Applies one setting. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value for `{key}`: `{value}`"));
        match key {
            "experiment" => {
                let kind = ExperimentKind::parse(value).ok_or_else(bad)?;
                if kind != self.kind {
                    return Err(Error::Config(format!("config is for {kind}, not {}", self.kind)));
                }
            }
            "methods" => self.methods = parse_list(value, |m| Method::parse(m).ok_or_else(bad))?,
            "values" => self.values = parse_list(value, |v| v.parse().map_err(|_| bad()))?,
            "seeds" => self.seeds = parse_seeds(value).ok_or_else(bad)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "jobs" => self.jobs = value.parse().map_err(|_| bad())?,
            "purity" => self.purity = value.parse().map_err(|_| bad())?,
            "groups" => self.groups = value.parse().map_err(|_| bad())?,
            "group_size" => self.group_size = value.parse().map_err(|_| bad())?,
            "test_groups" => self.test_groups = value.parse().map_err(|_| bad())?,
            "test_size" => self.test_size = value.parse().map_err(|_| bad())?,
            "strong" => self.strong = value.parse().map_err(|_| bad())?,
            "mode" => self.imbalanced = parse_mode(value).ok_or_else(bad)?,
            "beta" => self.beta = BetaSource::parse(value)?,
            "quantile" => self.quantile = value.parse().map_err(|_| bad())?,
            "beta_epochs" => self.beta_epochs = value.parse().map_err(|_| bad())?,
            _ => {
                if !set_scorer(&mut self.scorer, key, value)? && !set_train(&mut self.train, key, value)? {
                    return Err(Error::Config(format!("unknown setting `{key}`")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }
}

fn parse_list<T>(raw: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

/// `0,1,2` or a half-open range `0..5`.
pub fn parse_seeds(raw: &str) -> Option<Vec<u64>> {
    if let Some((a, b)) = raw.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (a < b).then(|| (a..b).collect());
    }
    parse_list(raw, |s| s.parse().map_err(|_| Error::Config(String::new()))).ok()
}

pub fn parse_mode(raw: &str) -> Option<bool> {
    match raw {
        "balanced" => Some(false),
        "imbalanced" => Some(true),
        _ => None,
    }
}

pub fn scorer_pairs(spec: &ScorerSpec) -> Pairs {
    let mut p = Pairs::new();
    kv::push(
        &mut p,
        "scorer",
        match spec.kind {
            ScorerKind::Logistic => "logistic",
            ScorerKind::Mlp => "mlp",
        },
    );
    let hidden: Vec<String> = spec.hidden_sizes.iter().map(|h| h.to_string()).collect();
    kv::push(&mut p, "hidden", hidden.join(","));
    kv::push(&mut p, "dropout", spec.dropout_rate);
    kv::push(&mut p, "activation", crate::model_io::activation_name(spec.activation));
    p
}

/// Applies a scorer setting; `Ok(false)` if `key` is not one.
pub fn set_scorer(spec: &mut ScorerSpec, key: &str, value: &str) -> Result<bool> {
    let bad = || Error::Config(format!("bad value for `{key}`: `{value}`"));
    match key {
        "scorer" => match value {
            "logistic" => {
                spec.kind = ScorerKind::Logistic;
                spec.hidden_sizes.clear();
            }
            "mlp" => {
                spec.kind = ScorerKind::Mlp;
                if spec.hidden_sizes.is_empty() {
                    spec.hidden_sizes = vec![128, 64];
                }
            }
            _ => return Err(bad()),
        },
        "hidden" => spec.hidden_sizes = parse_list(value, |h| h.parse().map_err(|_| bad()))?,
        "dropout" => spec.dropout_rate = value.parse().map_err(|_| bad())?,
        "activation" => {
            spec.activation = match value {
                "tanh" => Activation::Tanh,
                "relu" => Activation::Relu,
                _ => return Err(bad()),
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn train_pairs(t: &TrainConfig) -> Pairs {
    let mut p = Pairs::new();
    kv::push(&mut p, "learning_rate", t.learning_rate);
    kv::push(&mut p, "momentum", t.momentum);
    kv::push(&mut p, "epochs", t.epochs);
    kv::push(
        &mut p,
        "batch",
        match t.batch {
            Batch::Full => "full".to_string(),
            Batch::Size(n) => n.to_string(),
        },
    );
    let lambdas: Vec<String> = t.lambda_grid.iter().map(|l| l.to_string()).collect();
    kv::push(&mut p, "lambdas", lambdas.join(","));
    kv::push(&mut p, "folds", t.folds);
    kv::push(&mut p, "sharpness", t.objective.sharpness);
    kv::push(&mut p, "temperature", t.objective.temperature);
    kv::push(&mut p, "grid_size", t.objective.gamma_grid.len());
    p
}

/// `n` evenly spaced thresholds `k/(n+1)`.
pub fn gamma_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

/// Applies a training setting; `Ok(false)` if `key` is not one.
pub fn set_train(t: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    let bad = || Error::Config(format!("bad value for `{key}`: `{value}`"));
    match key {
        "learning_rate" => t.learning_rate = value.parse().map_err(|_| bad())?,
        "momentum" => t.momentum = value.parse().map_err(|_| bad())?,
        "epochs" => t.epochs = value.parse().map_err(|_| bad())?,
        "batch" => {
            t.batch = match value {
                "full" => Batch::Full,
                n => Batch::Size(n.parse().map_err(|_| bad())?),
            }
        }
        "lambdas" => t.lambda_grid = parse_list(value, |l| l.parse().map_err(|_| bad()))?,
        "folds" => t.folds = value.parse().map_err(|_| bad())?,
        "sharpness" => t.objective.sharpness = value.parse().map_err(|_| bad())?,
        "temperature" => t.objective.temperature = value.parse().map_err(|_| bad())?,
        "grid_size" => {
            let n: usize = value.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            t.objective.gamma_grid = gamma_grid(n);
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Datasets shared by all cells of one `(value, seed)`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub strong: Dataset,
    pub weak: Dataset,
    pub groups: GroupTable,
    pub test: Dataset,
    /// Noise rates of the weak set, when both classes are present.
    pub rates: Option<NoiseRates>,
    pub beta_hat: Option<f64>,
}

// Seed streams for the data of one split.
const WEAK: u64 = 101;
const TEST: u64 = 102;
const STRONG: u64 = 103;
const WEAK_SKEW: u64 = 104;
const TEST_SKEW: u64 = 105;

fn balanced(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    Ok(synth::sample_instances(spec, n / 2, n - n / 2, seed)?)
}

fn needs_beta(cfg: &ExperimentConfig) -> bool {
    cfg.imbalanced && cfg.methods.iter().any(|m| matches!(m, Method::Weasl | Method::OnlyWeak))
}

/// Generates the datasets for one `(value, seed)` and estimates `β̂` if any
/// method needs it.
pub fn prepare(cfg: &ExperimentConfig, value: f64, seed: u64) -> Result<Prepared> {
    let mix = GaussianMixtureSpec::purity_default();
    let purity_at = |f: f64, groups: usize, s: u64| {
        synth::gen_purity_dataset(
            &PurityConfig {
                purity: f,
                n_pos_groups: groups,
                n_neg_groups: groups,
                ..cfg.purity_config(s)
            },
            &mix,
        )
    };
    let (weak_seed, test_seed, strong_seed) =
        (derive_seed(seed, WEAK), derive_seed(seed, TEST), derive_seed(seed, STRONG));
    let (strong, (weak, groups), test) = match cfg.kind {
        ExperimentKind::PuritySweep | ExperimentKind::BaselineCompare => (
            balanced(&mix, cfg.strong, strong_seed)?,
            purity_at(value, cfg.groups, weak_seed)?,
            purity_at(value, cfg.test_groups, test_seed)?.0.without_groups(),
        ),
        ExperimentKind::SkewSweep => {
            let (w, wg) = purity_at(cfg.purity, cfg.groups, weak_seed)?;
            let (t, tg) = purity_at(cfg.purity, cfg.test_groups, test_seed)?;
            (
                balanced(&mix, cfg.strong, strong_seed)?,
                synth::subsample_skew(&w, &wg, value, derive_seed(seed, WEAK_SKEW))?,
                synth::subsample_skew(&t, &tg, value, derive_seed(seed, TEST_SKEW))?.0.without_groups(),
            )
        }
        ExperimentKind::StrongCountSweep | ExperimentKind::ComplexityCompare => (
            balanced(&mix, value as usize, strong_seed)?,
            purity_at(cfg.purity, cfg.groups, weak_seed)?,
            balanced(&mix, cfg.test_size, test_seed)?,
        ),
    };
    let rates = noise::true_noise_rates(&weak).ok();
    let beta_hat = if needs_beta(cfg) {
        Some(match cfg.beta {
            BetaSource::Fixed(b) => b,
            BetaSource::True => {
                rates.ok_or_else(|| Error::Config("true beta needs both classes in the weak set".into()))?.beta
            }
            BetaSource::Auto => {
                let mut spec = cfg.scorer.clone();
                spec.input_dim = weak.dim();
                let est_cfg = TrainConfig {
                    method: Method::OnlyStrong,
                    seed,
                    epochs: cfg.beta_epochs,
                    ..cfg.train.clone()
                };
                noise::estimate_beta(&strong, &weak, &spec, &est_cfg, cfg.quantile)?
            }
        })
    } else {
        None
    };
    Ok(Prepared {
        strong,
        weak,
        groups,
        test,
        rates,
        beta_hat,
    })
}

/// One grid cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub x: f64,
    pub seed: u64,
    pub scorer: ScorerSpec,
    pub method: Method,
    split: usize,
}

/// Outcome of one cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: std::result::Result<RunInfo, String>,
}

#[derive(Debug, Clone)]
pub struct RunInfo {
    pub metrics: MetricsReport,
    pub lambda: Option<f64>,
    pub beta_hat: Option<f64>,
    pub threshold: f64,
    pub objective: f64,
    pub rates: Option<NoiseRates>,
    pub predictions: Vec<bool>,
    /// Test labels the predictions are scored against.
    pub truth: Vec<bool>,
}

pub fn scorer_label(spec: &ScorerSpec) -> String {
    match spec.kind {
        ScorerKind::Logistic => "logistic".into(),
        ScorerKind::Mlp => {
            let h: Vec<String> = spec.hidden_sizes.iter().map(|h| h.to_string()).collect();
            format!("mlp{}", h.join("x"))
        }
    }
}

/// The training configuration of one cell.
pub fn cell_train_config(cfg: &ExperimentConfig, method: Method, seed: u64, beta_hat: Option<f64>) -> Result<TrainConfig> {
    let mut t = cfg.train.clone();
    t.method = method;
    t.seed = seed;
    t.objective.mode = match (cfg.imbalanced, method) {
        (true, Method::Weasl | Method::OnlyWeak) => WeakMode::Imbalanced {
            beta_hat: beta_hat.ok_or_else(|| Error::Config("imbalanced mode needs beta".into()))?,
        },
        _ => WeakMode::Balanced,
    };
    Ok(t)
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell, data: &Prepared) -> Result<RunInfo> {
    let mut spec = cell.scorer.clone();
    spec.input_dim = data.weak.dim();
    let t = cell_train_config(cfg, cell.method, cell.seed, data.beta_hat)?;
    let model: TrainedModel = train::train(&data.strong, &data.weak, Some(&data.groups), &spec, &t)?;
    let predictions = model.predict(&data.test)?;
    let truth = data.test.true_labels()?;
    let metrics = MetricsReport::from_predictions(&predictions, &truth)?;
    Ok(RunInfo {
        metrics,
        lambda: model.provenance.lambda,
        beta_hat: model.provenance.beta_hat,
        threshold: model.threshold,
        objective: model.provenance.objective_value,
        rates: data.rates,
        predictions,
        truth,
    })
}

/// Grid cells in output order: value, seed, scorer, method.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let scorers = cfg.scorers();
    let mut out = Vec::new();
    for (vi, &x) in cfg.values.iter().enumerate() {
        for (si, &seed) in cfg.seeds.iter().enumerate() {
            for scorer in &scorers {
                for &method in &cfg.methods {
                    out.push(Cell {
                        x,
                        seed,
                        scorer: scorer.clone(),
                        method,
                        split: vi * cfg.seeds.len() + si,
                    });
                }
            }
        }
    }
    out
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Runs every cell. Individual failures are captured per cell.
pub fn run(cfg: &ExperimentConfig, log: bool) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let splits: Vec<(f64, u64)> =
        cfg.values.iter().flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let cells = cells(cfg);
    let pool = pool(cfg.jobs)?;
    let results = pool.install(|| {
        let prepared: Vec<std::result::Result<Prepared, String>> = splits
            .par_iter()
            .map(|&(v, s)| prepare(cfg, v, s).map_err(|e| e.to_string()))
            .collect();
        for (&(v, s), p) in splits.iter().zip(&prepared) {
            if let Some(w) = p.as_ref().ok().and_then(|p| p.rates).and_then(assumption_warning) {
                eprintln!("warning: {}={v} seed={s}: {w}", cfg.kind.x_label());
            }
        }
        cells
            .par_iter()
            .map(|cell| {
                let start = Instant::now();
                let outcome = match &prepared[cell.split] {
                    Ok(data) => run_cell(cfg, cell, data).map_err(|e| e.to_string()),
                    Err(e) => Err(format!("data: {e}")),
                };
                if log {
                    let status = match &outcome {
                        Ok(r) => format!("{}={:.4}", cfg.kind.metric(), metric_value(&r.metrics, cfg.kind.metric())),
                        Err(e) => format!("FAILED {e}"),
                    };
                    eprintln!(
                        "[{}] x={} seed={} scorer={} method={} {} ({:.1}s)",
                        cfg.kind,
                        cell.x,
                        cell.seed,
                        scorer_label(&cell.scorer),
                        cell.method,
                        status,
                        start.elapsed().as_secs_f64()
                    );
                }
                CellResult {
                    cell: cell.clone(),
                    outcome,
                }
            })
            .collect()
    });
    Ok(results)
}

/// A warning when the weak labels break `alpha + beta < 1`.
pub fn assumption_warning(rates: NoiseRates) -> Option<String> {
    let check = noise::check_ccn_assumptions(rates);
    (!check.holds).then(|| {
        format!(
            "alpha + beta = {:.4} >= 1, group labels are no better than random (margin {:.4})",
            rates.alpha + rates.beta,
            check.margin
        )
    })
}

pub fn metric_value(m: &MetricsReport, name: &str) -> f64 {
    match name {
        "accuracy" => m.accuracy,
        "precision" => m.precision,
        "recall" => m.recall,
        "f_measure" => m.f_measure,
        "g_measure" => m.g_measure,
        _ => f64::NAN,
    }
}

/// Column order of the results file.
pub const RESULT_COLUMNS: [&str; 23] = [
    "experiment",
    "x",
    "method",
    "scorer",
    "seed",
    "status",
    "error",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "precision",
    "recall",
    "f_measure",
    "g_measure",
    "skew",
    "lambda",
    "beta_hat",
    "true_alpha",
    "true_beta",
    "threshold",
    "objective",
];

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// One results row per cell, columns as in [`RESULT_COLUMNS`].
pub fn result_row(kind: ExperimentKind, r: &CellResult) -> Vec<String> {
    let c = &r.cell;
    let mut row = vec![
        kind.name().to_string(),
        c.x.to_string(),
        c.method.to_string(),
        scorer_label(&c.scorer),
        c.seed.to_string(),
    ];
    match &r.outcome {
        Ok(info) => {
            let m = &info.metrics;
            row.push("ok".into());
            row.push(String::new());
            row.extend([m.tp, m.fp, m.tn, m.fn_].map(|v| v.to_string()));
            row.extend([m.accuracy, m.precision, m.recall, m.f_measure, m.g_measure, m.skew].map(|v| v.to_string()));
            row.push(opt(info.lambda));
            row.push(opt(info.beta_hat));
            row.push(opt(info.rates.map(|r| r.alpha)));
            row.push(opt(info.rates.map(|r| r.beta)));
            row.push(info.threshold.to_string());
            row.push(info.objective.to_string());
        }
        Err(e) => {
            row.push("failed".into());
            row.push(e.replace(['\n', '\r'], " "));
            row.resize(RESULT_COLUMNS.len(), String::new());
        }
    }
    row
}

/// Error-overlap counts per seed for `baseline_compare`: one row per
/// `(x, seed, region)` with the member methods joined by `+`.
pub fn venn_rows(cfg: &ExperimentConfig, results: &[CellResult]) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &x in &cfg.values {
        for &seed in &cfg.seeds {
            let group: Vec<&CellResult> =
                results.iter().filter(|r| r.cell.x == x && r.cell.seed == seed).collect();
            let Some(ok) = group.iter().map(|r| r.outcome.as_ref().ok()).collect::<Option<Vec<_>>>() else {
                continue;
            };
            if ok.len() < 2 {
                continue;
            }
            let truth = &ok[0].truth;
            let preds: Vec<Vec<bool>> = ok.iter().map(|i| i.predictions.clone()).collect();
            let venn = eval::error_venn_from_predictions(&preds, truth)?;
            for (mask, count) in venn.non_empty_regions() {
                let members: Vec<&str> = group
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, r)| r.cell.method.name())
                    .collect();
                rows.push(vec![
                    x.to_string(),
                    seed.to_string(),
                    mask.to_string(),
                    members.join("+"),
                    count.to_string(),
                ]);
            }
        }
    }
    Ok(rows)
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct Outputs {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub plot_data: PathBuf,
    pub plot_svg: PathBuf,
    pub venn: Option<PathBuf>,
    pub failed: usize,
}

fn write_csv(path: &Path, header: &Pairs, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = kv::format_comment(header);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Format(e.to_string()))?);
    fs::write(path, out).map_err(Error::io(path))
}

/// Writes the results, summary, plot data, SVG and (for `baseline_compare`)
/// error-overlap files into `cfg.output_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, results: &[CellResult]) -> Result<Outputs> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let header = cfg.to_pairs();
    let rows: Vec<Vec<String>> = results.iter().map(|r| result_row(cfg.kind, r)).collect();
    let results_path = dir.join("results.csv");
    write_csv(&results_path, &header, &RESULT_COLUMNS, &rows)?;

    let table = report::ResultsTable::from_rows(header.clone(), &rows)?;
    let written = report::write_report(&table, dir)?;

    let venn = if cfg.kind == ExperimentKind::BaselineCompare {
        let path = dir.join("venn.csv");
        write_csv(&path, &header, &["x", "seed", "region", "methods", "count"], &venn_rows(cfg, results)?)?;
        Some(path)
    } else {
        None
    };
    Ok(Outputs {
        results: results_path,
        summary: written.summary,
        plot_data: written.plot_data,
        plot_svg: written.plot_svg,
        venn,
        failed: results.iter().filter(|r| r.outcome.is_err()).count(),
    })
}

/// Human-readable table of mean target metric per `(x, method)`.
pub fn format_table(cfg: &ExperimentConfig, results: &[CellResult]) -> String {
    let metric = cfg.kind.metric();
    let mut s = String::new();
    let _ = writeln!(s, "{} ({metric}, mean over seeds)", cfg.kind);
    for &x in &cfg.values {
        let _ = write!(s, "  {}={x:<8}", cfg.kind.x_label());
        for scorer in cfg.scorers() {
            for &m in &cfg.methods {
                let vals: Vec<f64> = results
                    .iter()
                    .filter(|r| r.cell.x == x && r.cell.method == m && r.cell.scorer == scorer)
                    .filter_map(|r| r.outcome.as_ref().ok())
                    .map(|i| metric_value(&i.metrics, metric))
                    .collect();
                let mean = if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                };
                let label = if cfg.scorers().len() > 1 {
                    format!("{m}/{}", scorer_label(&scorer))
                } else {
                    m.to_string()
                };
                let _ = write!(s, " {label}={mean:.4}");
            }
        }
        s.push('\n');
    }
    s
}
