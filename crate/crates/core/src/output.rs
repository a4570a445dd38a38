//! Per-user records, campaign summaries, and the files they are written to.
//!
//! Every real number in a record is rounded to 9 significant digits when the
//! record is built, and summaries are computed from records only, so a
//! summary recomputed from a re-read `results.csv` is identical to the one
//! written next to it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::{Algorithm, DropOutcome, RunSpec, RunStatus};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::solvers::DropLabel;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.echo";

pub const CSV_HEADER: [&str; 13] = [
    "drop",
    "cell",
    "user",
    "algo",
    "pilot_mW",
    "data_mW",
    "se_bps_hz",
    "served",
    "iters",
    "converged",
    "status",
    "power_mW",
    "drop_label",
];

pub const POWER_DEFINITION: &str =
    "power_mW is the time-averaged transmit power (tau_p * pilot + (tau_c - tau_p) * data) / tau_c";

/// Rounds to 9 significant digits, the precision written to disk.
pub fn round9(x: f64) -> f64 {
    fmt9(x).parse().expect("formatted float parses")
}

fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub drop: usize,
    pub cell: usize,
    pub user: usize,
    pub algo: Algorithm,
    #[serde(rename = "pilot_mW")]
    pub pilot_mw: f64,
    #[serde(rename = "data_mW")]
    pub data_mw: f64,
    pub se_bps_hz: f64,
    pub served: bool,
    pub iters: usize,
    pub converged: bool,
    pub status: RunStatus,
    #[serde(rename = "power_mW")]
    pub power_mw: f64,
    pub drop_label: DropLabel,
}

impl UserRecord {
    fn csv_fields(&self) -> [String; 13] {
        [
            self.drop.to_string(),
            self.cell.to_string(),
            self.user.to_string(),
            self.algo.to_string(),
            fmt9(self.pilot_mw),
            fmt9(self.data_mw),
            fmt9(self.se_bps_hz),
            self.served.to_string(),
            self.iters.to_string(),
            self.converged.to_string(),
            self.status.as_str().to_string(),
            fmt9(self.power_mw),
            self.drop_label.as_str().to_string(),
        ]
    }
}

/// Flattens drop outcomes into one record per user per algorithm. The served
/// flag is recomputed from the rounded SE.
pub fn build_records(outcomes: &[DropOutcome], cfg: &SystemConfig, served_slack: f64) -> Vec<UserRecord> {
    let tau_p = cfg.pilot_length as f64;
    let tau_c = cfg.coherence_length as f64;
    let mut out = Vec::new();
    for o in outcomes {
        for run in &o.runs {
            for l in 0..cfg.num_cells {
                for k in 0..cfg.users_per_cell {
                    let u = cfg.user_index(l, k);
                    let pilot = run.allocation.pilot[u];
                    let data = run.allocation.data[u];
                    let se = round9(run.per_user_se[u]);
                    out.push(UserRecord {
                        drop: o.drop,
                        cell: l,
                        user: k,
                        algo: run.algorithm,
                        pilot_mw: round9(pilot * 1e3),
                        data_mw: round9(data * 1e3),
                        se_bps_hz: se,
                        served: run.status.has_allocation() && se >= (1.0 - served_slack) * cfg.se_target[u],
                        iters: run.iterations,
                        converged: run.converged,
                        status: run.status,
                        power_mw: round9((tau_p * pilot + (tau_c - tau_p) * data) / tau_c * 1e3),
                        drop_label: o.label,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub drops: usize,
    /// Drops where the algorithm reports the targets unachievable (congested
    /// fixed point, or infeasible global problem), over drops without a
    /// numerical failure.
    pub infeasible_fraction: f64,
    pub numerical_failures: usize,
    /// Users below their requested SE, over all users of drops without a
    /// numerical failure.
    pub unserved_fraction: f64,
    /// Mean per-user power over rows that carry an allocation, mW.
    pub mean_power_mw: Option<f64>,
    pub mean_power_feasible_mw: Option<f64>,
    pub mean_power_congested_mw: Option<f64>,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
    /// Sorted per-user power samples (mW) from rows that carry an allocation.
    pub power_cdf: Vec<f64>,
    /// Sorted per-user SE samples (b/s/Hz) from the same rows.
    pub se_cdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub num_drops: usize,
    pub seed: u64,
    pub users_per_drop: usize,
    pub feasible_drops: usize,
    pub congested_drops: usize,
    pub power_definition: String,
    pub algorithms: BTreeMap<Algorithm, AlgorithmSummary>,
}

impl CampaignSummary {
    pub fn get(&self, algo: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.get(&algo)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates records. Depends only on the records and the run identity.
pub fn summarize(records: &[UserRecord], num_drops: usize, seed: u64, users_per_drop: usize) -> CampaignSummary {
    let mut labels: BTreeMap<usize, DropLabel> = BTreeMap::new();
    for r in records {
        labels.insert(r.drop, r.drop_label);
    }
    let feasible_drops = labels.values().filter(|l| **l == DropLabel::Feasible).count();

    let mut algorithms = BTreeMap::new();
    for algo in Algorithm::ALL {
        let rows: Vec<&UserRecord> = records.iter().filter(|r| r.algo == algo).collect();
        if rows.is_empty() {
            continue;
        }
        // One representative row per drop, in drop order.
        let mut per_drop: BTreeMap<usize, &UserRecord> = BTreeMap::new();
        for r in &rows {
            per_drop.entry(r.drop).or_insert(r);
        }
        let drops = per_drop.len();
        let failures = per_drop.values().filter(|r| r.status == RunStatus::NumericalFailure).count();
        let clean = drops - failures;
        let infeasible = per_drop.values().filter(|r| r.status.is_infeasible()).count();
        let clean_rows: Vec<&&UserRecord> =
            rows.iter().filter(|r| r.status != RunStatus::NumericalFailure).collect();
        let unserved = clean_rows.iter().filter(|r| !r.served).count();
        let with_alloc: Vec<&&UserRecord> = rows.iter().filter(|r| r.status.has_allocation()).collect();
        let mut power_cdf: Vec<f64> = with_alloc.iter().map(|r| r.power_mw).collect();
        let mut se_cdf: Vec<f64> = with_alloc.iter().map(|r| r.se_bps_hz).collect();
        power_cdf.sort_by(f64::total_cmp);
        se_cdf.sort_by(f64::total_cmp);
        let by_label = |label: DropLabel| mean(with_alloc.iter().filter(|r| r.drop_label == label).map(|r| r.power_mw));
        algorithms.insert(
            algo,
            AlgorithmSummary {
                drops,
                infeasible_fraction: if clean > 0 { infeasible as f64 / clean as f64 } else { 0.0 },
                numerical_failures: failures,
                unserved_fraction: if clean_rows.is_empty() {
                    0.0
                } else {
                    unserved as f64 / clean_rows.len() as f64
                },
                mean_power_mw: mean(with_alloc.iter().map(|r| r.power_mw)),
                mean_power_feasible_mw: by_label(DropLabel::Feasible),
                mean_power_congested_mw: by_label(DropLabel::Congested),
                mean_iterations: mean(per_drop.values().map(|r| r.iters as f64)).unwrap_or(0.0),
                converged_fraction: per_drop.values().filter(|r| r.converged).count() as f64 / drops as f64,
                power_cdf,
                se_cdf,
            },
        );
    }
    CampaignSummary {
        num_drops,
        seed,
        users_per_drop,
        feasible_drops,
        congested_drops: labels.len() - feasible_drops,
        power_definition: POWER_DEFINITION.to_string(),
        algorithms,
    }
}

pub fn write_results_csv(records: &[UserRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record(r.csv_fields()).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<UserRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rd.headers().map_err(|e| csv_error(path, e))?.clone();
    for col in CSV_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: col.to_string(),
            });
        }
    }
    rd.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e.to_string())
    }
}

/// Resolved configuration plus run parameters, as TOML.
pub fn config_echo(spec: &RunSpec) -> String {
    let algos: Vec<String> = spec.algorithms.iter().map(|a| format!("\"{a}\"")).collect();
    format!(
        "{}\n[run]\nnum_drops = {}\nseed = {}\nalgorithms = [{}]\ntolerance = {:e}\nmax_iterations = {}\nserved_slack = {:e}\ngp_tol = {:e}\n",
        spec.config.to_toml(),
        spec.num_drops,
        spec.seed,
        algos.join(", "),
        spec.solver.tolerance,
        spec.solver.max_iterations,
        spec.solver.served_slack,
        spec.gp_tol,
    )
}

/// Writes `results.csv`, `summary.json` and `config.echo` into `dir`,
/// creating it if needed. Returns the paths written.
pub fn write_outputs(
    records: &[UserRecord],
    summary: &CampaignSummary,
    spec: &RunSpec,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results = dir.join(RESULTS_FILE);
    write_results_csv(records, &results)?;
    let summary_path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    let echo = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo, config_echo(spec)).map_err(|e| Error::io(&echo, e))?;
    Ok(vec![results, summary_path, echo])
}

pub fn read_summary(path: &Path) -> Result<CampaignSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}
