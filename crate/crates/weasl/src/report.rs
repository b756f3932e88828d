//! Summaries and plot data computed from a results file.
//!
//! `summary.csv` has one row per `(x, method, scorer)` with the number of
//! runs, the number of failures, and the mean and sample standard deviation
//! (n − 1 denominator, 0 for a single run) of each metric over successful runs.
//! `plot.csv` holds `x, series, mean, std` of the experiment's target metric
//! and `plot.svg` draws it.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentKind, RESULT_COLUMNS};
use crate::kv::{self, Pairs};

pub const METRICS: [&str; 5] = ["accuracy", "precision", "recall", "f_measure", "g_measure"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub x: f64,
    pub method: String,
    pub scorer: String,
    pub seed: u64,
    /// Metric values in [`METRICS`] order; `None` for failed runs.
    pub metrics: Option<[f64; 5]>,
}

/// Parsed results file: its reproducibility header and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub header: Pairs,
    pub kind: ExperimentKind,
    pub rows: Vec<ResultRow>,
}

fn column(name: &str) -> usize {
    RESULT_COLUMNS.iter().position(|c| *c == name).expect("known column")
}

impl ResultsTable {
    pub fn from_rows(header: Pairs, rows: &[Vec<String>]) -> Result<Self> {
        let kind_name = kv::get(&header, "experiment").ok_or_else(|| Error::Format("header lacks `experiment`".into()))?;
        let kind = ExperimentKind::parse(kind_name)
            .ok_or_else(|| Error::Format(format!("unknown experiment `{kind_name}`")))?;
        let parsed = rows
            .iter()
            .enumerate()
            .map(|(i, r)| parse_row(r).map_err(|message| Error::Parse { row: i as u64 + 1, message }))
            .collect::<Result<_>>()?;
        Ok(ResultsTable {
            header,
            kind,
            rows: parsed,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let comments: Vec<&str> =
            text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#')).collect();
        let header = kv::parse(&comments.join("\n"))?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let names: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if names != RESULT_COLUMNS {
            return Err(Error::Format(format!("unexpected results columns: {}", names.join(","))));
        }
        let rows: Vec<Vec<String>> = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Self::from_rows(header, &rows)
    }

    /// Cell keys `(x, method, scorer)` in first-appearance order.
    pub fn cells(&self) -> Vec<(f64, String, String)> {
        let mut out: Vec<(f64, String, String)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(x, m, s)| *x == r.x && *m == r.method && *s == r.scorer) {
                out.push((r.x, r.method.clone(), r.scorer.clone()));
            }
        }
        out
    }

    fn series_count(&self) -> usize {
        let mut scorers: Vec<&str> = self.rows.iter().map(|r| r.scorer.as_str()).collect();
        scorers.sort_unstable();
        scorers.dedup();
        scorers.len()
    }

    /// Summary statistics of one cell.
    pub fn stats(&self, x: f64, method: &str, scorer: &str) -> CellStats {
        let rows: Vec<&ResultRow> =
            self.rows.iter().filter(|r| r.x == x && r.method == method && r.scorer == scorer).collect();
        let ok: Vec<[f64; 5]> = rows.iter().filter_map(|r| r.metrics).collect();
        let mut mean = [f64::NAN; 5];
        let mut std = [f64::NAN; 5];
        for k in 0..5 {
            let vals: Vec<f64> = ok.iter().map(|m| m[k]).collect();
            (mean[k], std[k]) = mean_std(&vals);
        }
        CellStats {
            runs: rows.len(),
            failed: rows.len() - ok.len(),
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub runs: usize,
    pub failed: usize,
    pub mean: [f64; 5],
    pub std: [f64; 5],
}

/// Mean and sample standard deviation; `(NaN, NaN)` when empty.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn parse_row(r: &[String]) -> std::result::Result<ResultRow, String> {
    if r.len() != RESULT_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", RESULT_COLUMNS.len(), r.len()));
    }
    let num = |name: &str| -> std::result::Result<f64, String> {
        r[column(name)].parse().map_err(|_| format!("bad `{name}`: `{}`", r[column(name)]))
    };
    let metrics = match r[column("status")].as_str() {
        "ok" => {
            let mut m = [0.0; 5];
            for (slot, name) in m.iter_mut().zip(METRICS) {
                *slot = num(name)?;
            }
            Some(m)
        }
        "failed" => None,
        other => return Err(format!("unknown status `{other}`")),
    };
    Ok(ResultRow {
        x: num("x")?,
        method: r[column("method")].clone(),
        scorer: r[column("scorer")].clone(),
        seed: r[column("seed")].parse().map_err(|_| "bad `seed`".to_string())?,
        metrics,
    })
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Plot series name of a cell.
fn series(table: &ResultsTable, method: &str, scorer: &str) -> String {
    if table.series_count() > 1 {
        format!("{method}/{scorer}")
    } else {
        method.to_string()
    }
}

pub fn summary_rows(table: &ResultsTable) -> (Vec<String>, Vec<Vec<String>>) {
    let mut columns: Vec<String> = ["x", "method", "scorer", "runs", "failed"].map(String::from).to_vec();
    for m in METRICS {
        columns.push(format!("{m}_mean"));
        columns.push(format!("{m}_std"));
    }
    let rows = table
        .cells()
        .into_iter()
        .map(|(x, method, scorer)| {
            let st = table.stats(x, &method, &scorer);
            let mut row = vec![x.to_string(), method, scorer, st.runs.to_string(), st.failed.to_string()];
            for k in 0..5 {
                row.push(cell(st.mean[k]));
                row.push(cell(st.std[k]));
            }
            row
        })
        .collect();
    (columns, rows)
}

/// `(x, series, mean, std)` of the experiment's target metric.
pub fn plot_points(table: &ResultsTable) -> Vec<(f64, String, f64, f64)> {
    let k = METRICS.iter().position(|m| *m == table.kind.metric()).expect("metric");
    table
        .cells()
        .into_iter()
        .map(|(x, method, scorer)| {
            let st = table.stats(x, &method, &scorer);
            (x, series(table, &method, &scorer), st.mean[k], st.std[k])
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Written {
    pub summary: PathBuf,
    pub plot_data: PathBuf,
    pub plot_svg: PathBuf,
}

fn write_table(path: &Path, header: &Pairs, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let mut text = kv::format_comment(header);
    text.push_str(&String::from_utf8_lossy(&body));
    fs::write(path, text).map_err(Error::io(path))
}

/// Writes `summary.csv`, `plot.csv` and `plot.svg` into `dir`.
pub fn write_report(table: &ResultsTable, dir: &Path) -> Result<Written> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let (columns, rows) = summary_rows(table);
    let summary = dir.join("summary.csv");
    write_table(&summary, &table.header, &columns, &rows)?;

    let points = plot_points(table);
    let plot_data = dir.join("plot.csv");
    let plot_rows: Vec<Vec<String>> =
        points.iter().map(|(x, s, m, d)| vec![x.to_string(), s.clone(), cell(*m), cell(*d)]).collect();
    let plot_cols = ["x", "series", "mean", "std"].map(String::from);
    write_table(&plot_data, &table.header, &plot_cols, &plot_rows)?;

    let plot_svg = dir.join("plot.svg");
    let title = format!("{}: {} vs {}", table.kind, table.kind.metric(), table.kind.x_label());
    let svg = render_svg(&title, table.kind.x_label(), table.kind.metric(), &points);
    fs::write(&plot_svg, svg).map_err(Error::io(&plot_svg))?;
    Ok(Written {
        summary,
        plot_data,
        plot_svg,
    })
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Line chart with one polyline and ±std whiskers per series. The x axis is
/// categorical (sweep values in order of appearance).
pub fn render_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, String, f64, f64)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 170.0, 40.0, 50.0);
    let mut xs: Vec<f64> = Vec::new();
    let mut names: Vec<&str> = Vec::new();
    for (x, s, _, _) in points {
        if !xs.contains(x) {
            xs.push(*x);
        }
        if !names.contains(&s.as_str()) {
            names.push(s);
        }
    }
    let finite = points.iter().filter(|p| p.2.is_finite());
    let lo = finite.clone().map(|p| p.2 - p.3.max(0.0)).fold(f64::INFINITY, f64::min).min(1.0);
    let hi = finite.map(|p| p.2 + p.3.max(0.0)).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo.max(0.0).min(hi), hi.min(1.0).max(lo)) } else { (0.0, 1.0) };
    let (lo, hi) = if hi - lo < 1e-9 { (0.0, 1.0) } else { (lo, hi) };
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let px = |i: usize| {
        if xs.len() == 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * i as f64 / (xs.len() - 1) as f64
        }
    };
    let py = |v: f64| top + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    s.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h,
        top + plot_h
    ));
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>\n",
            left - 6.0,
            py(v) + 4.0
        ));
    }
    for (i, x) in xs.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{x}</text>\n",
            px(i),
            top + plot_h + 18.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>\n",
        left + plot_w / 2.0,
        h - 10.0,
        escape(x_label),
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    ));
    for (k, name) in names.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64, f64)> = xs
            .iter()
            .enumerate()
            .filter_map(|(i, x)| {
                points
                    .iter()
                    .find(|p| p.0 == *x && p.1 == *name && p.2.is_finite())
                    .map(|p| (px(i), p.2, p.3))
            })
            .collect();
        let line: Vec<String> = pts.iter().map(|(x, m, _)| format!("{x:.1},{:.1}", py(*m))).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            line.join(" ")
        ));
        for (x, m, d) in &pts {
            let d = if d.is_finite() { *d } else { 0.0 };
            s.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"{color}\"/>\n<circle cx=\"{x:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                py((m - d).max(lo)),
                py((m + d).min(hi)),
                py(*m)
            ));
        }
        let ly = top + 10.0 + 18.0 * k as f64;
        s.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n<text x=\"{}\" y=\"{}\">{}</text>\n",
            w - right + 15.0,
            ly - 10.0,
            w - right + 32.0,
            ly,
            escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
