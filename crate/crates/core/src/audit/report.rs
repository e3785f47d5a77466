//! Audit report assembly and emission.
//!
//! The JSON form is the full self-describing artifact: it embeds the config
//! that produced it, so a report can be re-run. Timings live in a single
//! `timings` field so byte comparisons can mask exactly one key. The CSV
//! form is two (or three) flat tables meant for external plotting.

use super::{AuditConfig, AuditError};
use crate::explain::Method;
use crate::robustness::{NoiseProbeResult, RobustnessSummary, WorstPair};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPairRecord {
    pub method: Method,
    pub pair: WorstPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub anchor_index: usize,
    pub result: NoiseProbeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTable {
    pub method: Method,
    pub rows: Vec<NoiseRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub seconds: f64,
}

/// Wall-clock measurements. The only nondeterministic part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub total_seconds: f64,
    pub per_method: Vec<MethodTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub config: AuditConfig,
    pub summaries: Vec<RobustnessSummary>,
    pub worst_pairs: Vec<WorstPairRecord>,
    pub noise_tables: Vec<NoiseTable>,
    pub failures: Vec<MethodFailure>,
    pub timings: Timings,
}

impl AuditReport {
    pub fn to_json_string(&self) -> Result<String, AuditError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a report and re-checks the embedded config, so a report that
    /// claims to be re-runnable actually is.
    pub fn from_json_str(s: &str) -> Result<Self, AuditError> {
        let report: AuditReport = serde_json::from_str(s)?;
        report.config.validate()?;
        Ok(report)
    }

    /// Long-format table: one row per defined estimate.
    pub fn long_csv(&self) -> Result<String, AuditError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "point_index", "estimate"])?;
        for summary in &self.summaries {
            for est in &summary.estimates {
                if let Some(value) = est.value {
                    w.write_record([
                        summary.method.name(),
                        &est.anchor_index.to_string(),
                        &value.to_string(),
                    ])?;
                }
            }
        }
        csv_into_string(w)
    }

    /// Per-method quartile table for boxplots.
    pub fn summary_csv(&self) -> Result<String, AuditError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "median", "q1", "q3", "max", "undefined_count"])?;
        for summary in &self.summaries {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let s = summary.stats;
            w.write_record([
                summary.method.name(),
                &fmt(s.map(|s| s.median)),
                &fmt(s.map(|s| s.lower_quartile)),
                &fmt(s.map(|s| s.upper_quartile)),
                &fmt(s.map(|s| s.max)),
                &summary.undefined_count.to_string(),
            ])?;
        }
        csv_into_string(w)
    }

    /// Per-perturbation noise table: (sigma, delta, prediction drift) rows.
    pub fn noise_csv(&self) -> Result<String, AuditError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "method",
            "anchor_index",
            "perturbation",
            "sigma",
            "delta",
            "prediction_drift",
        ])?;
        for table in &self.noise_tables {
            for row in &table.rows {
                let r = &row.result;
                for (k, (delta, drift)) in r.deltas.iter().zip(&r.prediction_drifts).enumerate() {
                    w.write_record([
                        table.method.name(),
                        &row.anchor_index.to_string(),
                        &k.to_string(),
                        &r.sigma.to_string(),
                        &delta.to_string(),
                        &drift.to_string(),
                    ])?;
                }
            }
        }
        csv_into_string(w)
    }
}

fn csv_into_string(w: csv::Writer<Vec<u8>>) -> Result<String, AuditError> {
    let bytes = w
        .into_inner()
        .map_err(|e| AuditError::Config(format!("csv buffer: {}", e)))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes the report to disk and returns the files created.
///
/// JSON lands at `out` verbatim. CSV replaces the extension of `out` with
/// `.long.csv` and `.summary.csv` (plus `.noise.csv` when the report has
/// noise tables).
pub fn emit_report(
    report: &AuditReport,
    format: ReportFormat,
    out: &Path,
) -> Result<Vec<PathBuf>, AuditError> {
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            std::fs::write(out, report.to_json_string()?)?;
            written.push(out.to_path_buf());
        }
        ReportFormat::Csv => {
            let stem = out.with_extension("");
            let long = stem.with_extension("long.csv");
            std::fs::write(&long, report.long_csv()?)?;
            written.push(long);
            let summary = stem.with_extension("summary.csv");
            std::fs::write(&summary, report.summary_csv()?)?;
            written.push(summary);
            if !report.noise_tables.is_empty() {
                let noise = stem.with_extension("noise.csv");
                std::fs::write(&noise, report.noise_csv()?)?;
                written.push(noise);
            }
        }
    }
    Ok(written)
}
