//! Executing configured runs: the block gate, the deterministic solve, the
//! cutoff re-run and the optional Monte Carlo ensemble.

use micromaser_core::atom_field::block_deviation;
use micromaser_core::collision::{trajectory_seed, Ensemble, EnsembleStats};
use micromaser_core::evolve::{integrate, Trajectory};
use micromaser_core::linalg::frobenius_norm;
use micromaser_core::master_eq::{Generator, Liouvillian};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::scenario::Job;

/// Largest tolerated deviation of the assembled propagator from the numeric
/// exponential before a run is refused.
pub const BLOCK_GATE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("propagator check failed: deviation {0:e} exceeds {BLOCK_GATE:e}")]
    Gate(f64),
    #[error("{0}")]
    Core(#[from] micromaser_core::Error),
}

impl RunError {
    /// CLI exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        use micromaser_core::Error as E;
        match self {
            RunError::Config(_) => 1,
            RunError::Gate(_) => 2,
            RunError::Core(E::Validation { .. } | E::NotHermitian(_)) => 2,
            RunError::Core(E::StepUnderflow { .. } | E::StepBudget { .. }) => 3,
            RunError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffCheck {
    pub n_max: usize,
    pub n_max_ref: usize,
    pub peak: f64,
    pub peak_ref: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: Option<String>,
    pub config: RunConfig,
    pub block_deviation: f64,
    pub trajectory: Trajectory,
    /// `‖G(ρ_final)‖_F`.
    pub residual: f64,
    pub cutoff_check: Option<CutoffCheck>,
    pub ensemble: Option<EnsembleStats>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.trajectory.converged && self.cutoff_check.as_ref().is_none_or(|c| c.passed)
    }

    pub fn final_log_neg(&self) -> f64 {
        self.trajectory.observables.last().map_or(0.0, |o| o.log_neg)
    }
}

/// The deterministic solve alone, with its stationarity residual.
pub fn solve(config: &RunConfig) -> Result<(Trajectory, f64), RunError> {
    let r = config.resolve()?;
    let traj = integrate(&r.spec, &r.rho0, &r.grid, &r.solver)?;
    let residual = frobenius_norm(&Generator::new(&r.spec)?.apply(&traj.final_state));
    Ok((traj, residual))
}

/// Seeded ensemble over the configured Monte Carlo grid, groups in parallel.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleStats, RunError> {
    let r = config.resolve()?;
    let mc = &config.monte_carlo;
    let seeds = (0..mc.n_traj as u64).map(|i| trajectory_seed(mc.seed, i)).collect();
    let grid = config.mc_grid()?;
    let mut solver = r.solver;
    // the per-trajectory spectrum is the dominant cost of an ensemble
    solver.validation_cadence = solver.validation_cadence.max(10);
    let ens = Ensemble::new(&r.spec.atom, &r.rho0, &r.spec.params, &grid, seeds, &solver)?;
    let groups = (0..ens.n_groups())
        .into_par_iter()
        .map(|g| ens.run_group(g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ens.combine(&groups)?)
}

pub fn run_job(job: &Job) -> Result<RunOutcome, RunError> {
    let config = &job.config;
    let r = config.resolve()?;
    let dev = block_deviation(&r.spec.params, r.spec.cutoff, &[r.spec.params.tau])?;
    if !(dev <= BLOCK_GATE) {
        return Err(RunError::Gate(dev));
    }
    let (trajectory, residual) = solve(config)?;
    let cutoff_check = if config.output.cutoff_check {
        let n_ref = config.field.n_max + 4;
        let (reference, _) = solve(&config.with_cutoff(n_ref))?;
        let (peak, peak_ref) = (trajectory.peak_log_neg().1, reference.peak_log_neg().1);
        let difference = (peak - peak_ref).abs();
        Some(CutoffCheck {
            n_max: config.field.n_max,
            n_max_ref: n_ref,
            peak,
            peak_ref,
            difference,
            tolerance: config.output.cutoff_tolerance,
            passed: difference <= config.output.cutoff_tolerance,
        })
    } else {
        None
    };
    let ensemble = if config.monte_carlo.n_traj > 0 {
        Some(run_ensemble(config)?)
    } else {
        None
    };
    Ok(RunOutcome {
        label: job.label.clone(),
        config: config.clone(),
        block_deviation: dev,
        trajectory,
        residual,
        cutoff_check,
        ensemble,
    })
}

/// Runs jobs in parallel, keeping their order.
pub fn run_jobs(jobs: &[Job]) -> Vec<Result<RunOutcome, RunError>> {
    jobs.par_iter().map(run_job).collect()
}
