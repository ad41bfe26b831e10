//! Experiment reports and their on-disk forms: a JSON report, a tidy CSV of
//! every check for plotting, and optional per-path sample tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use quatflag::sde::SimConfig;
use quatflag::stats::Comparison;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, ModelParams, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};

pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FILE: &str = "plot.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const JSONL_FILE: &str = "samples.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|z| <= threshold`, with the allowance stored in `tolerance`.
    ZScore,
    /// `estimate <= target`.
    AtMost,
    /// `estimate >= target`.
    AtLeast,
    /// `|estimate - target| <= tolerance`.
    Within,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub index: String,
    pub kind: CheckKind,
    pub estimate: f64,
    pub se: Option<f64>,
    pub target: f64,
    pub z: Option<f64>,
    pub tolerance: Option<f64>,
    /// Informational checks are reported but do not decide the outcome.
    pub enforced: bool,
    pub pass: bool,
}

impl Check {
    pub fn z(name: &str, index: impl Into<String>, c: &Comparison) -> Self {
        Self {
            name: name.into(),
            index: index.into(),
            kind: CheckKind::ZScore,
            estimate: c.estimate,
            se: Some(c.se),
            target: c.target,
            z: Some(c.z),
            tolerance: Some(c.allowance),
            enforced: true,
            pass: c.pass,
        }
    }

    fn bound(name: &str, index: String, kind: CheckKind, estimate: f64, target: f64, tolerance: Option<f64>) -> Self {
        let pass = match kind {
            CheckKind::AtMost => estimate <= target,
            CheckKind::AtLeast => estimate >= target,
            CheckKind::Within => (estimate - target).abs() <= tolerance.unwrap_or(0.0),
            CheckKind::ZScore => unreachable!("z checks are built from comparisons"),
        };
        Self { name: name.into(), index, kind, estimate, se: None, target, z: None, tolerance, enforced: true, pass }
    }

    pub fn at_most(name: &str, index: impl Into<String>, estimate: f64, bound: f64) -> Self {
        Self::bound(name, index.into(), CheckKind::AtMost, estimate, bound, None)
    }

    pub fn at_least(name: &str, index: impl Into<String>, estimate: f64, bound: f64) -> Self {
        Self::bound(name, index.into(), CheckKind::AtLeast, estimate, bound, None)
    }

    pub fn within(name: &str, index: impl Into<String>, estimate: f64, target: f64, tolerance: f64) -> Self {
        Self::bound(name, index.into(), CheckKind::Within, estimate, target, Some(tolerance))
    }

    pub fn informational(mut self) -> Self {
        self.enforced = false;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub sim: SimConfig,
    pub model: ModelParams,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Kind-specific results.
    pub details: serde_json::Value,
}

impl Report {
    pub fn new(kind: ExperimentKind, sim: &SimConfig, model: &ModelParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            sim: sim.clone(),
            model: model.clone(),
            pass: true,
            checks: Vec::new(),
            notes: Vec::new(),
            details: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, c: impl IntoIterator<Item = Check>) {
        self.checks.extend(c);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn detail<T: Serialize>(&mut self, key: &str, value: &T) -> CliResult<()> {
        let v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(m) = &mut self.details {
            m.insert(key.into(), v);
        }
        Ok(())
    }

    /// Set `pass` from the enforced checks.
    pub fn finish(mut self) -> Self {
        self.pass = self.checks.iter().filter(|c| c.enforced).all(|c| c.pass);
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.enforced && !c.pass)
    }
}

/// Per-path values, one row per retained path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub rows: Vec<(u64, Vec<f64>)>,
}

impl SampleTable {
    /// Column names `prefix{j}_{i,j,k}` for `n` imaginary quaternions.
    pub fn quaternion_columns(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).flat_map(|j| ["i", "j", "k"].map(|u| format!("{prefix}{j}_{u}"))).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub samples: Option<SampleTable>,
}

#[derive(Serialize)]
struct PlotRow<'a> {
    experiment: &'a str,
    quantity: &'a str,
    index: &'a str,
    value: f64,
    se: Option<f64>,
    target: f64,
    z: Option<f64>,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Tidy long-format rows, one per check.
pub fn write_plot_csv<W: Write>(report: &Report, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in &report.checks {
        out.serialize(PlotRow {
            experiment: report.kind.name(),
            quantity: &c.name,
            index: &c.index,
            value: c.estimate,
            se: c.se,
            target: c.target,
            z: c.z,
        })?;
    }
    out.flush().map_err(|e| CliError::Io(PathBuf::from(PLOT_FILE), e))?;
    Ok(())
}

pub fn write_samples_csv<W: Write>(table: &SampleTable, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["path".to_string()];
    header.extend(table.columns.iter().cloned());
    out.write_record(&header)?;
    for (i, row) in &table.rows {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| CliError::Io(PathBuf::from(SAMPLES_FILE), e))?;
    Ok(())
}

/// Write the report, the plot table and any samples into `dir`; returns the files written.
pub fn write_outputs(outcome: &Outcome, dir: &Path, jsonl: bool) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let mut written = Vec::new();
    let path = dir.join(REPORT_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &outcome.report)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::Io(path.clone(), e))?;
    written.push(path);
    let path = dir.join(PLOT_FILE);
    write_plot_csv(&outcome.report, create(&path)?)?;
    written.push(path);
    if let Some(t) = &outcome.samples {
        let path = dir.join(SAMPLES_FILE);
        write_samples_csv(t, create(&path)?)?;
        written.push(path);
        if jsonl {
            let path = dir.join(JSONL_FILE);
            let mut w = create(&path)?;
            for (i, row) in &t.rows {
                let mut obj = serde_json::Map::new();
                obj.insert("path".into(), (*i).into());
                for (c, v) in t.columns.iter().zip(row) {
                    obj.insert(c.clone(), serde_json::to_value(v)?);
                }
                serde_json::to_writer(&mut w, &obj)?;
                w.write_all(b"\n").map_err(|e| CliError::Io(path.clone(), e))?;
            }
            w.flush().map_err(|e| CliError::Io(path.clone(), e))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into())
}

/// Human-readable summary; at most `max_rows` checks are listed, failures
/// first and informational checks last.
pub fn render_table(report: &Report, max_rows: usize) -> String {
    let mut s = format!("{} (n = {}, seed = {})\n", report.kind, report.sim.n, report.sim.seed);
    s += &format!(
        "{:<20} {:<24} {:>12} {:>11} {:>12} {:>9} {:>5}\n",
        "check", "index", "estimate", "se", "target", "z", ""
    );
    let mut order: Vec<&Check> = report.failures().collect();
    order.extend(report.checks.iter().filter(|c| c.enforced && c.pass));
    order.extend(report.checks.iter().filter(|c| !c.enforced));
    for c in order.iter().take(max_rows) {
        let status = match (c.enforced, c.pass) {
            (false, _) => "info",
            (true, true) => "ok",
            (true, false) => "FAIL",
        };
        s += &format!(
            "{:<20} {:<24} {:>12.5e} {:>11} {:>12.5e} {:>9} {:>5}\n",
            c.name,
            c.index,
            c.estimate,
            fmt_opt(c.se),
            c.target,
            c.z.map(|z| format!("{z:.2}")).unwrap_or_else(|| "-".into()),
            status
        );
    }
    if order.len() > max_rows {
        s += &format!("... {} more checks in {REPORT_FILE}\n", order.len() - max_rows);
    }
    for n in &report.notes {
        s += &format!("note: {n}\n");
    }
    let enforced = report.checks.iter().filter(|c| c.enforced).count();
    let failed = report.failures().count();
    s += &format!("{}: {} of {enforced} checks passed\n", if report.pass { "PASS" } else { "FAIL" }, enforced - failed);
    s
}
