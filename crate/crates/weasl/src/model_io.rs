//! Scorer and trained-model files.
//!
//! ```text
//! weasl-params 1
//! kind=mlp
//! input_dim=2
//! hidden=128,64
//! dropout=0.5
//! activation=tanh
//! threshold=0.42          (trained models only, with the provenance keys)
//! ...
//! params=8705
//! ---
//! <one parameter per line, shortest round-trip decimal>
//! ```
//!
//! Parameters are laid out layer by layer: the `outputs × inputs` weight
//! matrix row-major, then the `outputs` biases. The header is `key=value`
//! text; `note` may repeat.

use std::fs;
use std::path::Path;

use weasl_core::model::{Activation, ScorerKind, ScorerParams, ScorerSpec};
use weasl_core::train::{Method, Provenance, TrainedModel};

use crate::error::{Error, Result};
use crate::kv::{self, Pairs};

const MAGIC: &str = "weasl-params 1";

fn spec_pairs(spec: &ScorerSpec) -> Pairs {
    let mut p = Pairs::new();
    kv::push(
        &mut p,
        "kind",
        match spec.kind {
            ScorerKind::Logistic => "logistic",
            ScorerKind::Mlp => "mlp",
        },
    );
    kv::push(&mut p, "input_dim", spec.input_dim);
    let hidden: Vec<String> = spec.hidden_sizes.iter().map(|h| h.to_string()).collect();
    kv::push(&mut p, "hidden", hidden.join(","));
    kv::push(&mut p, "dropout", spec.dropout_rate);
    kv::push(&mut p, "activation", activation_name(spec.activation));
    p
}

pub fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Header pairs describing a trained model (spec, threshold, provenance).
pub fn model_pairs(model: &TrainedModel) -> Pairs {
    let mut p = spec_pairs(&model.spec);
    let pr = &model.provenance;
    kv::push(&mut p, "threshold", model.threshold);
    kv::push(&mut p, "method", pr.method);
    kv::push(&mut p, "seed", pr.seed);
    kv::push(&mut p, "lambda", opt(pr.lambda));
    kv::push(&mut p, "beta_hat", opt(pr.beta_hat));
    kv::push(&mut p, "objective", pr.objective_value);
    kv::push(&mut p, "epochs", pr.epochs);
    kv::push(&mut p, "learning_rate", pr.learning_rate);
    kv::push(&mut p, "momentum", pr.momentum);
    kv::push(&mut p, "sharpness", pr.sharpness);
    kv::push(&mut p, "temperature", pr.temperature);
    kv::push(&mut p, "grid_size", pr.grid_size);
    for note in &pr.notes {
        kv::push(&mut p, "note", note);
    }
    p
}

fn render(mut header: Pairs, params: &ScorerParams) -> String {
    kv::push(&mut header, "params", params.len());
    let mut out = format!("{MAGIC}\n{}---\n", kv::format(&header));
    for v in params.values() {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

pub fn params_to_string(spec: &ScorerSpec, params: &ScorerParams) -> String {
    render(spec_pairs(spec), params)
}

pub fn model_to_string(model: &TrainedModel) -> String {
    render(model_pairs(model), &model.params)
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(Error::io(path))
}

pub fn save_params(spec: &ScorerSpec, params: &ScorerParams, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), params_to_string(spec, params))
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), model_to_string(model))
}

struct Parsed {
    header: Pairs,
    spec: ScorerSpec,
    params: ScorerParams,
}

fn field<'a>(h: &'a Pairs, key: &str) -> Result<&'a str> {
    kv::get(h, key).ok_or_else(|| Error::Format(format!("missing header key `{key}`")))
}

fn number<T: std::str::FromStr>(h: &Pairs, key: &str) -> Result<T> {
    let raw = field(h, key)?;
    raw.parse().map_err(|_| Error::Format(format!("bad value for `{key}`: `{raw}`")))
}

fn optional(h: &Pairs, key: &str) -> Result<Option<f64>> {
    match field(h, key)? {
        "" => Ok(None),
        raw => raw
            .parse()
            .map(Some)
            .map_err(|_| Error::Format(format!("bad value for `{key}`: `{raw}`"))),
    }
}

fn parse(text: &str) -> Result<Parsed> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Format(format!("expected first line `{MAGIC}`")));
    }
    let header_text: Vec<&str> = lines.by_ref().take_while(|l| *l != "---").collect();
    let header = kv::parse(&header_text.join("\n"))?;
    let kind = match field(&header, "kind")? {
        "logistic" => ScorerKind::Logistic,
        "mlp" => ScorerKind::Mlp,
        other => return Err(Error::Format(format!("unknown scorer kind `{other}`"))),
    };
    let hidden_sizes = match field(&header, "hidden")? {
        "" => Vec::new(),
        raw => raw
            .split(',')
            .map(|h| h.trim().parse().map_err(|_| Error::Format(format!("bad hidden size `{h}`"))))
            .collect::<Result<_>>()?,
    };
    let activation = match field(&header, "activation")? {
        "tanh" => Activation::Tanh,
        "relu" => Activation::Relu,
        other => return Err(Error::Format(format!("unknown activation `{other}`"))),
    };
    let spec = ScorerSpec {
        kind,
        input_dim: number(&header, "input_dim")?,
        hidden_sizes,
        dropout_rate: number(&header, "dropout")?,
        activation,
    };
    spec.validate()?;
    let expected: usize = number(&header, "params")?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Format(format!("parameter {k} is not a number: `{l}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::Format(format!("header promises {expected} parameters, found {}", values.len())));
    }
    let params = ScorerParams::from_values(&spec, values)?;
    Ok(Parsed { header, spec, params })
}

pub fn params_from_str(text: &str) -> Result<(ScorerSpec, ScorerParams)> {
    let p = parse(text)?;
    Ok((p.spec, p.params))
}

pub fn model_from_str(text: &str) -> Result<TrainedModel> {
    let Parsed { header: h, spec, params } = parse(text)?;
    let method_name = field(&h, "method")?;
    let method = Method::parse(method_name).ok_or_else(|| Error::Format(format!("unknown method `{method_name}`")))?;
    let threshold: f64 = number(&h, "threshold")?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Format(format!("threshold {threshold} outside (0, 1)")));
    }
    let provenance = Provenance {
        method,
        seed: number(&h, "seed")?,
        lambda: optional(&h, "lambda")?,
        beta_hat: optional(&h, "beta_hat")?,
        objective_value: number(&h, "objective")?,
        epochs: number(&h, "epochs")?,
        learning_rate: number(&h, "learning_rate")?,
        momentum: number(&h, "momentum")?,
        sharpness: number(&h, "sharpness")?,
        temperature: number(&h, "temperature")?,
        grid_size: number(&h, "grid_size")?,
        notes: h.iter().filter(|(k, _)| k == "note").map(|(_, v)| v.clone()).collect(),
    };
    Ok(TrainedModel {
        spec,
        params,
        threshold,
        provenance,
        trace: Vec::new(),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<(ScorerSpec, ScorerParams)> {
    params_from_str(&read(path.as_ref())?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    model_from_str(&read(path.as_ref())?)
}
