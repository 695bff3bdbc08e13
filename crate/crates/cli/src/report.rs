//! Experiment reports and their deterministic emission.
//!
//! The CSV schema is fixed: `experiment,n,value,reference,gap,residual,status`.
//! Identical config and seed produce byte-identical CSV and summary files;
//! wall-clock timings therefore live only in the in-memory report, never in
//! the emitted artifacts.

use crate::Result;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "reason")]
pub enum RowStatus {
    /// Informational row (a computed value, not an asserted check).
    Ok,
    Pass,
    Fail,
    Skipped(String),
}

impl RowStatus {
    fn as_csv(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::Pass => "pass".into(),
            RowStatus::Fail => "fail".into(),
            RowStatus::Skipped(reason) => format!("skip({})", reason.replace(',', ";")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub n: Option<u64>,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub gap: Option<f64>,
    pub residual: Option<f64>,
    pub status: RowStatus,
}

impl ReportRow {
    pub fn info(experiment: impl Into<String>) -> Self {
        ReportRow {
            experiment: experiment.into(),
            n: None,
            value: None,
            reference: None,
            gap: None,
            residual: None,
            status: RowStatus::Ok,
        }
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn with_reference(mut self, v: f64) -> Self {
        self.reference = Some(v);
        self
    }

    pub fn with_gap(mut self, v: f64) -> Self {
        self.gap = Some(v);
        self
    }

    pub fn with_residual(mut self, v: f64) -> Self {
        self.residual = Some(v);
        self
    }

    pub fn with_status(mut self, status: RowStatus) -> Self {
        self.status = status;
        self
    }

    /// Pass/fail from a residual; the tolerance rides in the reference
    /// column so every check row carries both.
    pub fn check(experiment: impl Into<String>, residual: f64, tol: f64, ok: bool) -> Self {
        ReportRow::info(experiment)
            .with_residual(residual)
            .with_reference(tol)
            .with_status(if ok { RowStatus::Pass } else { RowStatus::Fail })
    }
}

/// Fixed, reproducible provenance fields for emitted artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct EnvironmentStamp {
    pub package: String,
    pub version: String,
    pub seed: u64,
    pub config: String,
}

impl EnvironmentStamp {
    pub fn new(seed: u64, config: impl Into<String>) -> Self {
        EnvironmentStamp {
            package: "nlexp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: config.into(),
        }
    }
}

/// Per-n lattice metadata; wall times stay in memory (reports must be
/// byte-stable across runs).
#[derive(Debug, Clone)]
pub struct NestedMeta {
    pub n: u32,
    pub node_count: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub label: String,
    pub kind: String,
    pub rows: Vec<ReportRow>,
    pub nested_meta: Vec<NestedMeta>,
    /// (grid spacing, origin value) per refinement level, when a convergence
    /// run extrapolates the PDE side.
    pub refinement: Option<Vec<(f64, f64)>>,
    pub stamp: EnvironmentStamp,
}

fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // normalize -0.0
        "0".into()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl ExperimentReport {
    pub fn new(label: impl Into<String>, kind: impl Into<String>, stamp: EnvironmentStamp) -> Self {
        ExperimentReport {
            label: label.into(),
            kind: kind.into(),
            rows: Vec::new(),
            nested_meta: Vec::new(),
            refinement: None,
            stamp,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.status != RowStatus::Fail)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,n,value,reference,gap,residual,status\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.experiment,
                row.n.map(|n| n.to_string()).unwrap_or_default(),
                fmt_opt(row.value),
                fmt_opt(row.reference),
                fmt_opt(row.gap),
                fmt_opt(row.residual),
                row.status.as_csv()
            );
        }
        out
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string(row).expect("rows serialize")
            );
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "kind": self.kind,
            "stamp": self.stamp,
            "rows": self.rows,
            "node_counts": self
                .nested_meta
                .iter()
                .map(|m| serde_json::json!({"n": m.n, "nodes": m.node_count}))
                .collect::<Vec<_>>(),
            "refinement": self.refinement.as_ref().map(|levels| {
                levels
                    .iter()
                    .map(|(h, v)| serde_json::json!({"h": h, "origin": v}))
                    .collect::<Vec<_>>()
            }),
            "all_pass": self.all_pass(),
        })
    }

    /// Writes `<label>-<kind>.csv` (or `.jsonl`) plus `<label>-<kind>-summary.json`
    /// under `dir`; returns the written paths ("emit_report").
    pub fn emit(&self, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let base = format!("{}-{}", sanitize(&self.label), sanitize(&self.kind));
        let mut written = Vec::new();
        let rows_path = match format {
            ReportFormat::Csv => {
                let p = dir.join(format!("{base}.csv"));
                std::fs::write(&p, self.to_csv())?;
                p
            }
            ReportFormat::JsonLines => {
                let p = dir.join(format!("{base}.jsonl"));
                std::fs::write(&p, self.to_json_lines())?;
                p
            }
        };
        written.push(rows_path);
        let summary_path = dir.join(format!("{base}-summary.json"));
        let mut text = serde_json::to_string_pretty(&self.summary_json()).expect("summary");
        text.push('\n');
        std::fs::write(&summary_path, text)?;
        written.push(summary_path);
        Ok(written)
    }

    /// One human-readable line per row, for stdout.
    pub fn console_lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let mut line = format!("[{}] {}", self.kind, r.experiment);
                if let Some(n) = r.n {
                    let _ = write!(line, " n={n}");
                }
                if let Some(v) = r.value {
                    let _ = write!(line, " value={}", fmt_f64(v));
                }
                if let Some(v) = r.reference {
                    let _ = write!(line, " reference={}", fmt_f64(v));
                }
                if let Some(v) = r.gap {
                    let _ = write!(line, " gap={}", fmt_f64(v));
                }
                if let Some(v) = r.residual {
                    let _ = write!(line, " residual={}", fmt_f64(v));
                }
                let _ = write!(line, " [{}]", r.status.as_csv());
                line
            })
            .collect()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" => Ok(ReportFormat::JsonLines),
            other => Err(crate::CliError::Config(format!(
                "unknown format {other:?} (expected csv or json-lines)"
            ))),
        }
    }
}
