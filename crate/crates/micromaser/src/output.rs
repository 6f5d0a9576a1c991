//! Plot-ready CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use micromaser_core::collision::EnsembleStats;
use micromaser_core::evolve::{SolverStats, Trajectory};
use serde::Serialize;

use crate::config::RunConfig;
use crate::run::{CutoffCheck, RunOutcome};

pub const SERIES_HEADER: [&str; 10] = [
    "t", "log_neg", "n1", "n2", "purity", "cross_re", "cross_im", "trace_err", "min_eig", "leakage",
];

pub const ENSEMBLE_HEADER: [&str; 9] = [
    "t", "log_neg", "log_neg_se", "n1", "n1_se", "n2", "n2_se", "purity", "purity_se",
];

/// Fixed scientific notation with 16 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.15e}")
}

pub fn write_series_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(SERIES_HEADER)?;
    for o in &traj.observables {
        w.write_record(
            [
                o.t,
                o.log_neg,
                o.n1,
                o.n2,
                o.purity,
                o.cross_coherence.re,
                o.cross_coherence.im,
                o.trace_err,
                o.min_eig,
                o.leakage,
            ]
            .map(num),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ensemble_csv(path: &Path, ens: &EnsembleStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(ENSEMBLE_HEADER)?;
    for i in 0..ens.times.len() {
        w.write_record(
            [
                ens.times[i],
                ens.log_neg[i],
                ens.se_log_neg[i],
                ens.mean_n1[i],
                ens.se_n1[i],
                ens.mean_n2[i],
                ens.se_n2[i],
                ens.mean_purity[i],
                ens.se_purity[i],
            ]
            .map(num),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct StatsRecord {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl From<SolverStats> for StatsRecord {
    fn from(s: SolverStats) -> Self {
        StatsRecord {
            accepted: s.accepted,
            rejected: s.rejected,
            evaluations: s.evaluations,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub max_trace_err: f64,
    pub min_eigenvalue: f64,
    pub max_leakage: f64,
    pub block_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct EnsembleRecord {
    pub n_traj: usize,
    pub seed: u64,
    pub table: String,
    pub mean_arrivals: f64,
    pub min_eigenvalue: f64,
    pub max_trace_err: f64,
    pub stats: StatsRecord,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub label: Option<String>,
    pub table: String,
    pub config: RunConfig,
    pub peak_log_neg: f64,
    pub t_peak: f64,
    pub final_log_neg: f64,
    pub steady_residual: f64,
    pub converged: bool,
    pub solver_stats: StatsRecord,
    pub diagnostics: Diagnostics,
    pub cutoff_check: Option<CutoffCheck>,
    pub monte_carlo: Option<EnsembleRecord>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub converged: bool,
    pub runs: Vec<RunRecord>,
}

fn stem(base: &str, label: Option<&str>) -> String {
    match label {
        Some(l) => format!("{base}_{l}"),
        None => base.to_string(),
    }
}

/// Writes the tables of every outcome plus `<name>.json` into `dir`.
/// Returns the manifest path.
pub fn write_outputs(dir: &Path, scenario: &str, outcomes: &[RunOutcome]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut runs = Vec::new();
    let mut name = "run".to_string();
    for o in outcomes {
        name = o.config.output.name.clone();
        let s = stem(&name, o.label.as_deref());
        let table = format!("{s}.csv");
        write_series_csv(&dir.join(&table), &o.trajectory)?;
        let monte_carlo = match &o.ensemble {
            Some(ens) => {
                let t = format!("{s}_mc.csv");
                write_ensemble_csv(&dir.join(&t), ens)?;
                Some(EnsembleRecord {
                    n_traj: ens.n_traj,
                    seed: o.config.monte_carlo.seed,
                    table: t,
                    mean_arrivals: ens.mean_arrivals,
                    min_eigenvalue: ens.min_eig,
                    max_trace_err: ens.max_trace_err,
                    stats: ens.stats.into(),
                })
            }
            None => None,
        };
        let (t_peak, peak) = o.trajectory.peak_log_neg();
        runs.push(RunRecord {
            label: o.label.clone(),
            table,
            config: o.config.clone(),
            peak_log_neg: peak,
            t_peak,
            final_log_neg: o.final_log_neg(),
            steady_residual: o.residual,
            converged: o.converged(),
            solver_stats: o.trajectory.stats.into(),
            diagnostics: Diagnostics {
                max_trace_err: o.trajectory.max_trace_err(),
                min_eigenvalue: o.trajectory.min_eigenvalue(),
                max_leakage: o.trajectory.max_leakage(),
                block_deviation: o.block_deviation,
            },
            cutoff_check: o.cutoff_check.clone(),
            monte_carlo,
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: scenario.to_string(),
        converged: outcomes.iter().all(RunOutcome::converged),
        runs,
    };
    let path = dir.join(format!("{name}.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
