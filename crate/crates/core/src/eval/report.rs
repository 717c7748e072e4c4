//! CSV rows, JSON summary and run manifest.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/results.csv     one row per trial x method
//! <out>/summary.json    per (method, snr_db, eta) aggregates
//! <out>/manifest.json   everything needed to rerun
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::trial::TrialRecord;
use super::{EvalConfig, Method};

/// Overrides the default output directory when no explicit path is given.
pub const OUT_DIR_ENV: &str = "FDD_SIM_OUT_DIR";

pub const CSV_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Column order is the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub trial: usize,
    pub method: Method,
    pub snr_db: f64,
    pub eta: f64,
    pub min_se_bps_hz: f64,
    pub t_star: usize,
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub t3_ms: f64,
    pub latency_ms: f64,
    pub ee_bpshz_per_w: f64,
    pub failed: bool,
}

pub fn rows_from_records(records: &[TrialRecord]) -> Vec<CsvRow> {
    records
        .iter()
        .flat_map(|r| {
            r.outcomes.iter().map(move |o| CsvRow {
                trial: r.trial,
                method: o.method,
                snr_db: r.snr_db,
                eta: r.eta,
                min_se_bps_hz: o.min_se,
                t_star: o.t_star,
                t1_ms: o.latency.t1_ms,
                t2_ms: o.latency.t2_ms,
                t3_ms: o.latency.t3_ms,
                latency_ms: o.latency.total_ms,
                ee_bpshz_per_w: o.energy_efficiency,
                failed: o.failed,
            })
        })
        .collect()
}

/// Nearest-rank quantile of an ascending slice; `q = 1` is the maximum.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyQuantiles {
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub method: Method,
    pub snr_db: f64,
    pub eta: f64,
    pub trials: usize,
    pub failures: usize,
    pub mean_min_se: f64,
    pub stderr_min_se: f64,
    pub mean_t_star: f64,
    pub mean_latency_ms: f64,
    pub latency: LatencyQuantiles,
    pub mean_ee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: Vec<PointSummary>,
    pub failure_rate: f64,
}

impl Summary {
    pub fn point(&self, method: Method, snr_db: f64, eta: f64) -> Option<&PointSummary> {
        self.points
            .iter()
            .find(|p| p.method == method && p.snr_db == snr_db && p.eta == eta)
    }
}

/// Aggregates per `(method, snr_db, eta)` in first-appearance order. Failed
/// rows are counted but excluded from every statistic.
pub fn summarize(rows: &[CsvRow]) -> Summary {
    let mut keys: Vec<(Method, f64, f64)> = Vec::new();
    for r in rows {
        let key = (r.method, r.snr_db, r.eta);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let points = keys
        .into_iter()
        .map(|(method, snr_db, eta)| {
            let group: Vec<&CsvRow> = rows
                .iter()
                .filter(|r| r.method == method && r.snr_db == snr_db && r.eta == eta)
                .collect();
            let ok: Vec<&CsvRow> = group.iter().copied().filter(|r| !r.failed).collect();
            let se: Vec<f64> = ok.iter().map(|r| r.min_se_bps_hz).collect();
            let mut lat: Vec<f64> = ok.iter().map(|r| r.latency_ms).collect();
            lat.sort_by(f64::total_cmp);
            let ee: Vec<f64> = ok.iter().map(|r| r.ee_bpshz_per_w).collect();
            let ts: Vec<f64> = ok.iter().map(|r| r.t_star as f64).collect();
            let (mean_min_se, stderr_min_se) = mean_and_stderr(&se);
            let latency = if lat.is_empty() {
                LatencyQuantiles {
                    p50_ms: f64::NAN,
                    p90_ms: f64::NAN,
                    max_ms: f64::NAN,
                }
            } else {
                LatencyQuantiles {
                    p50_ms: quantile(&lat, 0.5),
                    p90_ms: quantile(&lat, 0.9),
                    max_ms: quantile(&lat, 1.0),
                }
            };
            PointSummary {
                method,
                snr_db,
                eta,
                trials: group.len(),
                failures: group.len() - ok.len(),
                mean_min_se,
                stderr_min_se,
                mean_t_star: mean_and_stderr(&ts).0,
                mean_latency_ms: mean_and_stderr(&lat).0,
                latency,
                mean_ee: mean_and_stderr(&ee).0,
            }
        })
        .collect();
    let failed = rows.iter().filter(|r| r.failed).count();
    Summary {
        points,
        failure_rate: if rows.is_empty() { 0.0 } else { failed as f64 / rows.len() as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub snr_db: Vec<f64>,
    pub eta: Vec<f64>,
    pub threads: Option<usize>,
    pub config: EvalConfig,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, master_seed: u64, trials: usize, methods: &[Method], config: &EvalConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed,
            trials,
            methods: methods.to_vec(),
            snr_db: vec![config.system.snr_db],
            eta: vec![config.system.eta],
            threads: None,
            config: config.clone(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Explicit path, else `$FDD_SIM_OUT_DIR`, else `out`.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the CSV, summary and manifest under `out_dir`, creating it if needed.
pub fn emit_report(out_dir: &Path, records: &[TrialRecord], manifest: &Manifest) -> Result<ReportPaths> {
    if records.is_empty() {
        return Err(Error::Precondition("no trial records to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = rows_from_records(records);
    let csv_path = out_dir.join(CSV_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summarize(&rows))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_json(&manifest_path, manifest)?;
    Ok(ReportPaths {
        csv: csv_path,
        summary: summary_path,
        manifest: manifest_path,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
