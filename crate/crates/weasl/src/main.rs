use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weasl::csv_io;
use weasl::error::Error;
use weasl::experiment::{self, BetaSource, ExperimentConfig, ExperimentKind};
use weasl::kv::{self, Pairs};
use weasl::model_io;
use weasl::report;
use weasl_core::data::{Dataset, GroupTable};
use weasl_core::eval::{self, MetricsReport};
use weasl_core::model::ScorerSpec;
use weasl_core::noise;
use weasl_core::objective::WeakMode;
use weasl_core::synth::{self, GaussianMixtureSpec, PurityConfig};
use weasl_core::train::{self, Method, TrainConfig, TrainedModel};

#[derive(Parser)]
#[command(name = "weasl", version, about = "Weakly supervised binary classification from strong and group labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV plus a `.meta` sidecar).
    Gen(GenArgs),
    /// Train a model on strong and/or weak CSV files.
    Train(TrainArgs),
    /// Evaluate a saved model on a labeled CSV file.
    Eval(EvalArgs),
    /// Estimate β = Pr(g=1 | y=0) of a weak set.
    EstimateBeta(BetaArgs),
    /// Run a synthetic sweep.
    Experiment(ExperimentArgs),
    /// Recompute summary and plot files from a results CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output CSV; the sidecar goes to `<out>.meta`.
    #[arg(long, short, global = true, default_value = "data.csv")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum GenKind {
    /// Groups of the purity experiment: positive groups hold a fraction f of
    /// positives, negative groups are pure.
    Purity {
        #[arg(long)]
        f: f64,
        /// Groups per class.
        #[arg(long, default_value_t = 50)]
        groups: usize,
        #[arg(long, default_value_t = 20)]
        group_size: usize,
        /// Subsample whole positive groups to this #neg/#pos.
        #[arg(long)]
        skew: Option<f64>,
        /// Drop the group columns (for test sets).
        #[arg(long)]
        no_groups: bool,
    },
    /// Labeled instances from the purity experiment's mixture.
    Sample {
        #[arg(long)]
        n_pos: usize,
        #[arg(long)]
        n_neg: usize,
    },
    /// Two Gaussians with exact class-conditional noisy labels as singleton groups.
    Ccn {
        #[arg(long)]
        n: usize,
        /// Fraction of positives.
        #[arg(long, default_value_t = 0.5)]
        positive_rate: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Distance between class means in standard deviations.
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
    },
}

/// Settings shared by commands that train.
#[derive(Args, Clone)]
struct TrainFlags {
    /// key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    /// balanced or imbalanced.
    #[arg(long)]
    mode: Option<String>,
    /// auto, or a fixed value of β̂ (imbalanced mode).
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// logistic or mlp.
    #[arg(long)]
    scorer: Option<String>,
    /// Hidden layer sizes, e.g. 128,64.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Candidate λ values, e.g. 0.1,1,10.
    #[arg(long)]
    lambdas: Option<String>,
    /// Any other setting as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    strong: Option<PathBuf>,
    #[arg(long)]
    weak: Option<PathBuf>,
    /// Labeled set to report metrics on after training.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, short, default_value = "model.txt")]
    out: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Metrics CSV (stdout when absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BetaArgs {
    #[arg(long)]
    strong: PathBuf,
    #[arg(long)]
    weak: PathBuf,
    #[arg(long, default_value_t = noise::DEFAULT_QUANTILE)]
    quantile: f64,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct ExperimentArgs {
    /// purity_sweep, skew_sweep, strong_count_sweep, complexity_compare or baseline_compare.
    kind: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    values: Option<String>,
    /// Comma list or half-open range such as 0..5.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Any other setting as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Do not log one line per cell.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Output directory (defaults to the results file's directory).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Core(weasl_core::Error::Config(_)) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<weasl_core::Error> for Failure {
    fn from(e: weasl_core::Error) -> Self {
        Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::EstimateBeta(a) => cmd_estimate_beta(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Partial(n)) => {
            eprintln!("error: {n} run(s) failed; see the error column of the results file");
            ExitCode::from(3)
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let mut meta = Pairs::new();
    kv::push(&mut meta, "seed", a.seed);
    let ds = match a.kind {
        GenKind::Purity {
            f,
            groups,
            group_size,
            skew,
            no_groups,
        } => {
            let cfg = PurityConfig {
                purity: f,
                group_size,
                n_pos_groups: groups,
                n_neg_groups: groups,
                seed: a.seed,
            };
            kv::push(&mut meta, "generator", "purity");
            kv::push(&mut meta, "purity", f);
            kv::push(&mut meta, "groups", groups);
            kv::push(&mut meta, "group_size", group_size);
            let (mut ds, mut gt) = synth::gen_purity_dataset(&cfg, &GaussianMixtureSpec::purity_default())?;
            if let Some(target) = skew {
                kv::push(&mut meta, "skew_target", target);
                (ds, gt) = synth::subsample_skew(&ds, &gt, target, a.seed)?;
            }
            let rates = noise::true_noise_rates(&ds).ok();
            kv::push(&mut meta, "groups_kept", gt.len());
            kv::push(&mut meta, "true_alpha", rates.map_or(String::new(), |r| r.alpha.to_string()));
            kv::push(&mut meta, "true_beta", rates.map_or(String::new(), |r| r.beta.to_string()));
            kv::push(&mut meta, "no_groups", no_groups);
            if no_groups {
                ds.without_groups()
            } else {
                ds
            }
        }
        GenKind::Sample { n_pos, n_neg } => {
            kv::push(&mut meta, "generator", "sample");
            kv::push(&mut meta, "n_pos", n_pos);
            kv::push(&mut meta, "n_neg", n_neg);
            synth::sample_instances(&GaussianMixtureSpec::purity_default(), n_pos, n_neg, a.seed)?
        }
        GenKind::Ccn {
            n,
            positive_rate,
            alpha,
            beta,
            dim,
            separation,
        } => {
            if !(0.0..=1.0).contains(&positive_rate) {
                return Err(Failure::Usage("positive_rate must lie in [0, 1]".into()));
            }
            kv::push(&mut meta, "generator", "ccn");
            kv::push(&mut meta, "n", n);
            kv::push(&mut meta, "positive_rate", positive_rate);
            kv::push(&mut meta, "alpha", alpha);
            kv::push(&mut meta, "beta", beta);
            kv::push(&mut meta, "dim", dim);
            kv::push(&mut meta, "separation", separation);
            let n_pos = (positive_rate * n as f64).round() as usize;
            let clean = synth::sample_instances(&GaussianMixtureSpec::two_gaussians(dim, separation), n_pos, n - n_pos, a.seed)?;
            let noisy = synth::inject_ccn_noise(&clean, alpha, beta, a.seed)?;
            let rates = noise::true_noise_rates(&noisy).ok();
            kv::push(&mut meta, "true_alpha", rates.map_or(String::new(), |r| r.alpha.to_string()));
            kv::push(&mut meta, "true_beta", rates.map_or(String::new(), |r| r.beta.to_string()));
            noisy
        }
    };
    kv::push(&mut meta, "rows", ds.len());
    kv::push(&mut meta, "dim", ds.dim());
    csv_io::save_csv(&ds, &a.out)?;
    kv::write_file(sidecar_path(&a.out), &meta)?;
    eprintln!("wrote {} rows to {}", ds.len(), a.out.display());
    Ok(())
}

/// Fully resolved training settings.
struct TrainSettings {
    method: Method,
    imbalanced: bool,
    beta: Option<BetaSource>,
    quantile: f64,
    beta_epochs: usize,
    scorer: ScorerSpec,
    train: TrainConfig,
}

impl TrainSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let bad = || Failure::Usage(format!("bad value for `{key}`: `{value}`"));
        match key {
            "method" => self.method = Method::parse(value).ok_or_else(bad)?,
            "mode" => self.imbalanced = experiment::parse_mode(value).ok_or_else(bad)?,
            "beta" => self.beta = Some(BetaSource::parse(value)?),
            "seed" => self.train.seed = value.parse().map_err(|_| bad())?,
            "quantile" => self.quantile = value.parse().map_err(|_| bad())?,
            "beta_epochs" => self.beta_epochs = value.parse().map_err(|_| bad())?,
            _ => {
                if !experiment::set_scorer(&mut self.scorer, key, value)?
                    && !experiment::set_train(&mut self.train, key, value)?
                {
                    return Err(Failure::Usage(format!("unknown setting `{key}`")));
                }
            }
        }
        Ok(())
    }

    fn resolve(flags: &TrainFlags) -> Result<Self, Failure> {
        let mut s = TrainSettings {
            method: Method::Weasl,
            imbalanced: false,
            beta: None,
            quantile: noise::DEFAULT_QUANTILE,
            beta_epochs: noise::DEFAULT_ESTIMATION_EPOCHS,
            scorer: ScorerSpec::default_mlp(1),
            train: TrainConfig::default(),
        };
        if let Some(path) = &flags.config {
            for (k, v) in kv::read_file(path)? {
                s.set(&k, &v)?;
            }
        }
        for (k, v) in flag_pairs(flags)? {
            s.set(&k, &v)?;
        }
        s.train.method = s.method;
        Ok(s)
    }

    fn to_pairs(&self) -> Pairs {
        let mut p = Pairs::new();
        kv::push(&mut p, "method", self.method);
        kv::push(&mut p, "mode", if self.imbalanced { "imbalanced" } else { "balanced" });
        kv::push(&mut p, "beta", self.beta.map_or(String::new(), |b| b.to_string()));
        kv::push(&mut p, "seed", self.train.seed);
        kv::push(&mut p, "quantile", self.quantile);
        kv::push(&mut p, "beta_epochs", self.beta_epochs);
        p.extend(experiment::scorer_pairs(&self.scorer));
        p.extend(experiment::train_pairs(&self.train));
        p
    }
}

fn flag_pairs(f: &TrainFlags) -> Result<Pairs, Failure> {
    let mut p = Pairs::new();
    let mut add = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv::push(&mut p, k, v);
        }
    };
    add("method", f.method.clone());
    add("mode", f.mode.clone());
    add("beta", f.beta.clone());
    add("seed", f.seed.map(|v| v.to_string()));
    add("scorer", f.scorer.clone());
    add("hidden", f.hidden.clone());
    add("dropout", f.dropout.map(|v| v.to_string()));
    add("epochs", f.epochs.map(|v| v.to_string()));
    add("learning_rate", f.learning_rate.map(|v| v.to_string()));
    add("momentum", f.momentum.map(|v| v.to_string()));
    add("lambdas", f.lambdas.clone());
    p.extend(set_pairs(&f.set)?);
    Ok(p)
}

fn set_pairs(items: &[String]) -> Result<Pairs, Failure> {
    items
        .iter()
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Failure::Usage(format!("--set expects key=value, got `{item}`")))
        })
        .collect()
}

fn load(path: &Path) -> Result<(Dataset, Option<GroupTable>), Failure> {
    Ok(csv_io::load_csv(path, None)?)
}

fn empty_like(dim: usize) -> Dataset {
    Dataset::new(dim, Vec::new()).expect("empty dataset is valid")
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let mut s = TrainSettings::resolve(&a.flags)?;
    let m = s.method;
    fn need<'a>(path: &'a Option<PathBuf>, m: Method, what: &str) -> Result<&'a Path, Failure> {
        path.as_deref()
            .ok_or_else(|| Failure::Usage(format!("--method {m} needs --{what}")))
    }
    let strong = if m.uses_strong() { Some(load(need(&a.strong, m, "strong")?)?.0) } else { None };
    let (weak, groups) = if m.uses_weak() {
        let (ds, gt) = load(need(&a.weak, m, "weak")?)?;
        (Some(ds), gt)
    } else {
        (None, None)
    };
    let dim = strong.as_ref().or(weak.as_ref()).map(Dataset::dim).unwrap_or(1);
    s.scorer.input_dim = dim;
    let strong = strong.unwrap_or_else(|| empty_like(dim));
    let weak = weak.unwrap_or_else(|| empty_like(dim));

    if let Some(w) = noise::true_noise_rates(&weak).ok().and_then(experiment::assumption_warning) {
        eprintln!("warning: {w}");
    }
    let mut notes = vec![];
    if s.imbalanced && matches!(m, Method::Weasl | Method::OnlyWeak) {
        let beta_hat = match s.beta {
            None => {
                return Err(Failure::Usage(
                    "imbalanced mode needs a beta source: --beta auto or --beta <value>".into(),
                ))
            }
            Some(BetaSource::Fixed(b)) => b,
            Some(BetaSource::True) => noise::true_noise_rates(&weak)?.beta,
            Some(BetaSource::Auto) => {
                let strong_for_beta = match &a.strong {
                    Some(p) if m == Method::OnlyWeak => load(p)?.0,
                    _ if m == Method::OnlyWeak => {
                        return Err(Failure::Usage("--beta auto needs --strong".into()))
                    }
                    _ => strong.clone(),
                };
                let est_cfg = TrainConfig {
                    method: Method::OnlyStrong,
                    epochs: s.beta_epochs,
                    ..s.train.clone()
                };
                let b = noise::estimate_beta(&strong_for_beta, &weak, &s.scorer, &est_cfg, s.quantile)?;
                eprintln!("estimated beta_hat={b}");
                b
            }
        };
        s.train.objective.mode = WeakMode::Imbalanced { beta_hat };
        notes.push(format!("beta_source={}", s.beta.expect("checked")));
    }
    let mut model = train::train(&strong, &weak, groups.as_ref(), &s.scorer, &s.train)?;
    for (k, v) in s.to_pairs() {
        notes.push(format!("config.{k}={v}"));
    }
    for (what, path) in [("strong", &a.strong), ("weak", &a.weak)] {
        if let Some(p) = path {
            notes.push(format!("{what}={}", p.display()));
        }
    }
    model.provenance.notes.extend(notes);
    model_io::save_model(&model, &a.out)?;
    eprintln!("{}", train::describe(&model));
    if let Some(test) = &a.test {
        let (ds, _) = load(test)?;
        let report = eval::evaluate(&model, &ds)?;
        print!("{}", metrics_csv(&model, test, &report)?);
    }
    Ok(())
}

const METRIC_COLUMNS: [&str; 12] =
    ["method", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f_measure", "g_measure", "skew", "threshold"];

fn metrics_csv(model: &TrainedModel, test: &Path, r: &MetricsReport) -> Result<String, Failure> {
    let mut header = model_io::model_pairs(model);
    kv::push(&mut header, "test", test.display());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let row = [
        model.provenance.method.to_string(),
        r.tp.to_string(),
        r.fp.to_string(),
        r.tn.to_string(),
        r.fn_.to_string(),
        r.accuracy.to_string(),
        r.precision.to_string(),
        r.recall.to_string(),
        r.f_measure.to_string(),
        r.g_measure.to_string(),
        r.skew.to_string(),
        model.threshold.to_string(),
    ];
    w.write_record(METRIC_COLUMNS).and_then(|_| w.write_record(&row)).map_err(Error::from)?;
    let body = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(format!("{}{}", kv::format_comment(&header), String::from_utf8_lossy(&body)))
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let model = model_io::load_model(&a.model)?;
    let (test, _) = load(&a.test)?;
    let report = eval::evaluate(&model, &test)?;
    let text = metrics_csv(&model, &a.test, &report)?;
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_estimate_beta(a: BetaArgs) -> Outcome {
    let s = TrainSettings::resolve(&a.flags)?;
    let (strong, _) = load(&a.strong)?;
    let (weak, _) = load(&a.weak)?;
    let mut spec = s.scorer.clone();
    spec.input_dim = strong.dim();
    let cfg = TrainConfig {
        method: Method::OnlyStrong,
        epochs: s.beta_epochs,
        ..s.train.clone()
    };
    let beta = noise::estimate_beta(&strong, &weak, &spec, &cfg, a.quantile)?;
    println!("beta_hat={beta}");
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Outcome {
    let kind = ExperimentKind::parse(&a.kind).ok_or_else(|| {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        Failure::Usage(format!("unknown experiment `{}`; expected one of {}", a.kind, names.join(", ")))
    })?;
    let mut cfg = ExperimentConfig::new(kind);
    if let Some(path) = &a.config {
        cfg.apply(&kv::read_file(path)?)?;
    }
    let mut flags = Pairs::new();
    let mut add = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv::push(&mut flags, k, v);
        }
    };
    add("methods", a.methods.clone());
    add("values", a.values.clone());
    add("seeds", a.seeds.clone());
    add("output_dir", a.out.as_ref().map(|p| p.display().to_string()));
    add("jobs", a.jobs.map(|j| j.to_string()));
    flags.extend(set_pairs(&a.set)?);
    cfg.apply(&flags)?;
    cfg.validate()?;
    eprint!("{}", kv::format_comment(&cfg.to_pairs()));

    let results = experiment::run(&cfg, !a.quiet)?;
    let out = experiment::write_outputs(&cfg, &results)?;
    print!("{}", experiment::format_table(&cfg, &results));
    eprintln!("wrote {}", out.results.display());
    if out.failed > 0 {
        return Err(Failure::Partial(out.failed));
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Outcome {
    let table = report::ResultsTable::load(&a.results)?;
    let dir = a
        .out
        .clone()
        .or_else(|| a.results.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let written = report::write_report(&table, &dir)?;
    eprintln!("wrote {}, {}, {}", written.summary.display(), written.plot_data.display(), written.plot_svg.display());
    Ok(())
}
