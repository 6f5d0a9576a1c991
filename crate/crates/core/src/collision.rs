//! Stochastic repeated interactions: atoms arrive as a Poisson process, each
//! arrival applies the collision map instantaneously and the field decays
//! under pure loss between arrivals.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::atom_field::{AtomPreparation, CollisionMap, InteractionParams};
use crate::entanglement::{log_negativity, mode_observables, observe};
use crate::evolve::{AdaptiveStepper, SolverConfig, SolverStats, TimeGrid, Trajectory};
use crate::hilbert::{validate_state, Bipartition, DensityMatrix, FockCutoff, StateDiagnostics};
use crate::linalg::{hermiticity_error, symmetrize_in_place};
use crate::master_eq::LindbladGenerator;
use crate::{CMatrix, Error, Result};

/// Number of jackknife groups used for the E_N standard error.
pub const JACKKNIFE_GROUPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalProcess {
    pub rate: f64,
    pub horizon: f64,
    pub seed: u64,
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random bits mapped into (0, 1]
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Arrival times in `(0, horizon]`, strictly increasing.
pub fn sample_arrivals(proc: &ArrivalProcess) -> Vec<f64> {
    let mut out = Vec::new();
    if !(proc.rate > 0.0) || !(proc.horizon > 0.0) {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(proc.seed);
    let mut t = 0.0;
    loop {
        t += -libm::log(uniform_open(&mut rng)) / proc.rate;
        if t > proc.horizon {
            return out;
        }
        // a zero gap would break strict ordering
        if out.last().is_none_or(|&last| t > last) {
            out.push(t);
        }
    }
}

/// SplitMix64 finalizer, used to derive trajectory seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(index))
}

/// Shared per-run pieces: the collision map and the loss generator.
pub struct TrajectoryEngine {
    map: CollisionMap,
    loss: LindbladGenerator,
    cutoff: FockCutoff,
    config: SolverConfig,
    max_step: f64,
}

impl TrajectoryEngine {
    pub fn new(atom: &AtomPreparation, params: &InteractionParams, cutoff: FockCutoff, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let kappa = params.kappa1.max(params.kappa2);
        let max_step = config.max_step.unwrap_or(if kappa > 0.0 { 0.1 / kappa } else { f64::INFINITY });
        Ok(TrajectoryEngine {
            map: CollisionMap::new(atom, params, params.tau, cutoff)?,
            loss: LindbladGenerator::pure_loss(params, cutoff),
            cutoff,
            config: *config,
            max_step,
        })
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Runs one trajectory and hands every sampled state to `visit`.
    pub fn drive(
        &self,
        rho0: &DensityMatrix,
        arrivals: &[f64],
        grid: &TimeGrid,
        mut visit: impl FnMut(usize, f64, &CMatrix) -> Result<()>,
    ) -> Result<SolverStats> {
        grid.validate()?;
        if rho0.dim() != self.cutoff.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.cutoff.dim(),
                found: rho0.dim(),
            });
        }
        let mut stepper = AdaptiveStepper::new(&self.loss, &self.config, self.max_step);
        let mut rho = rho0.clone().into_inner();
        let mut t = grid.t_start;
        let mut next = arrivals.partition_point(|&a| a <= t);
        for i in 0..grid.n_samples {
            let ts = grid.time(i);
            while next < arrivals.len() && arrivals[next] <= ts {
                stepper.advance(&mut rho, t, arrivals[next])?;
                t = arrivals[next];
                rho = self.map.apply(&rho);
                symmetrize_in_place(&mut rho);
                next += 1;
            }
            stepper.advance(&mut rho, t, ts)?;
            t = ts;
            visit(i, ts, &rho)?;
        }
        Ok(stepper.stats)
    }

    /// One trajectory with full observable records.
    pub fn run(&self, rho0: &DensityMatrix, arrivals: &[f64], grid: &TimeGrid, retain_states: bool) -> Result<Trajectory> {
        let tol = self.config.tolerances;
        let cadence = self.config.validation_cadence;
        let mut observables = Vec::with_capacity(grid.n_samples);
        let mut diagnostics = Vec::with_capacity(grid.n_samples);
        let mut states = retain_states.then(Vec::new);
        let mut converged = true;
        let mut final_state = None;
        let cutoff = self.cutoff;
        let last = grid.n_samples - 1;
        let stats = self.drive(rho0, arrivals, grid, |i, t, rho| {
            let state = DensityMatrix::new(rho.clone())?;
            let validated = i % cadence == 0 || i == last;
            let rec = observe(t, &state, cutoff, validated)?;
            let diag = StateDiagnostics {
                trace_err: rec.trace_err,
                herm_err: hermiticity_error(rho),
                min_eig: rec.min_eig,
                leakage: rec.leakage,
            };
            if validated {
                if let Some((invariant, value, tolerance)) = diag.violation(&tol) {
                    return Err(Error::Validation {
                        t,
                        invariant,
                        value,
                        tolerance,
                    });
                }
            }
            converged &= !diag.leaks(&tol);
            observables.push(rec);
            diagnostics.push(diag);
            if i == last {
                final_state = Some(state.clone());
            }
            if let Some(s) = states.as_mut() {
                s.push(state);
            }
            Ok(())
        })?;
        Ok(Trajectory {
            times: grid.times(),
            states,
            observables,
            diagnostics,
            final_state: final_state.expect("grid has a last sample"),
            converged,
            stats,
        })
    }
}

/// One stochastic trajectory with default solver settings.
pub fn run_trajectory(
    atom: &AtomPreparation,
    rho0: &DensityMatrix,
    params: &InteractionParams,
    arrivals: &[f64],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    run_trajectory_with(atom, rho0, params, arrivals, grid, &SolverConfig::default())
}

pub fn run_trajectory_with(
    atom: &AtomPreparation,
    rho0: &DensityMatrix,
    params: &InteractionParams,
    arrivals: &[f64],
    grid: &TimeGrid,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let cutoff = FockCutoff::from_field_dim(rho0.dim())?;
    TrajectoryEngine::new(atom, params, cutoff, config)?.run(rho0, arrivals, grid, config.retain_states)
}

/// Running sums over a contiguous block of trajectories.
#[derive(Debug, Clone)]
pub struct GroupAccumulator {
    pub n_traj: usize,
    /// Σρ per sample.
    pub state_sum: Vec<CMatrix>,
    /// Per sample: Σx and Σx² for n1, n2, purity.
    pub scalar_sum: Vec<[f64; 3]>,
    pub scalar_sq_sum: Vec<[f64; 3]>,
    pub min_eig: f64,
    pub max_trace_err: f64,
    pub arrivals: usize,
    pub stats: SolverStats,
}

impl GroupAccumulator {
    fn new(n_samples: usize, dim: usize) -> Self {
        GroupAccumulator {
            n_traj: 0,
            state_sum: vec![CMatrix::zeros(dim, dim); n_samples],
            scalar_sum: vec![[0.0; 3]; n_samples],
            scalar_sq_sum: vec![[0.0; 3]; n_samples],
            min_eig: f64::INFINITY,
            max_trace_err: 0.0,
            arrivals: 0,
            stats: SolverStats::default(),
        }
    }
}

/// Sample-wise ensemble means and standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub mean_n1: Vec<f64>,
    pub mean_n2: Vec<f64>,
    pub mean_purity: Vec<f64>,
    pub se_n1: Vec<f64>,
    pub se_n2: Vec<f64>,
    pub se_purity: Vec<f64>,
    /// E_N of the averaged state.
    pub log_neg: Vec<f64>,
    /// Delete-one-group jackknife error of `log_neg`.
    pub se_log_neg: Vec<f64>,
    pub mean_states: Vec<DensityMatrix>,
    /// Smallest eigenvalue seen on the validated per-trajectory samples.
    pub min_eig: f64,
    pub max_trace_err: f64,
    pub mean_arrivals: f64,
    pub stats: SolverStats,
}

/// Everything needed to run a seeded ensemble.
pub struct Ensemble<'a> {
    pub engine: TrajectoryEngine,
    pub rho0: &'a DensityMatrix,
    pub rate: f64,
    pub grid: TimeGrid,
    pub seeds: Vec<u64>,
}

impl<'a> Ensemble<'a> {
    pub fn new(
        atom: &AtomPreparation,
        rho0: &'a DensityMatrix,
        params: &InteractionParams,
        grid: &TimeGrid,
        seeds: Vec<u64>,
        config: &SolverConfig,
    ) -> Result<Self> {
        if seeds.len() < 2 {
            return Err(Error::TooFewTrajectories(seeds.len()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSeed(w[0]));
        }
        grid.validate()?;
        let cutoff = FockCutoff::from_field_dim(rho0.dim())?;
        validate_state(rho0, cutoff)?;
        Ok(Ensemble {
            engine: TrajectoryEngine::new(atom, params, cutoff, config)?,
            rho0,
            rate: params.r,
            grid: *grid,
            seeds,
        })
    }

    pub fn n_groups(&self) -> usize {
        JACKKNIFE_GROUPS.min(self.seeds.len())
    }

    /// Trajectory index range of group `g`.
    pub fn group_range(&self, g: usize) -> core::ops::Range<usize> {
        let n = self.seeds.len();
        let k = self.n_groups();
        (g * n / k)..((g + 1) * n / k)
    }

    /// Runs the trajectories of group `g` sequentially.
    pub fn run_group(&self, g: usize) -> Result<GroupAccumulator> {
        let cutoff = self.engine.cutoff();
        let n_samples = self.grid.n_samples;
        let mut acc = GroupAccumulator::new(n_samples, cutoff.dim());
        let cadence = self.engine.config.validation_cadence;
        let tol = self.engine.config.tolerances;
        for idx in self.group_range(g) {
            let arrivals = sample_arrivals(&ArrivalProcess {
                rate: self.rate,
                horizon: self.grid.t_end,
                seed: self.seeds[idx],
            });
            acc.arrivals += arrivals.len();
            let stats = self.engine.drive(self.rho0, &arrivals, &self.grid, |i, t, rho| {
                let state = DensityMatrix::new(rho.clone())?;
                let obs = mode_observables(&state, cutoff);
                let x = [obs.n1, obs.n2, obs.purity];
                for j in 0..3 {
                    acc.scalar_sum[i][j] += x[j];
                    acc.scalar_sq_sum[i][j] += x[j] * x[j];
                }
                acc.state_sum[i] += rho;
                if i % cadence == 0 || i + 1 == n_samples {
                    let diag = validate_state(&state, cutoff)?;
                    acc.min_eig = acc.min_eig.min(diag.min_eig);
                    acc.max_trace_err = acc.max_trace_err.max(diag.trace_err);
                    if let Some((invariant, value, tolerance)) = diag.violation(&tol) {
                        return Err(Error::Validation {
                            t,
                            invariant,
                            value,
                            tolerance,
                        });
                    }
                }
                Ok(())
            })?;
            acc.stats += stats;
            acc.n_traj += 1;
        }
        Ok(acc)
    }

    /// Combines group results, which must be given in group order.
    pub fn combine(&self, groups: &[GroupAccumulator]) -> Result<EnsembleStats> {
        let n_samples = self.grid.n_samples;
        let split = Bipartition::modes(self.engine.cutoff());
        let n: usize = groups.iter().map(|g| g.n_traj).sum();
        let nf = n as f64;
        let mut mean = [vec![0.0; n_samples], vec![0.0; n_samples], vec![0.0; n_samples]];
        let mut se = mean.clone();
        let mut log_neg = vec![0.0; n_samples];
        let mut se_log_neg = vec![0.0; n_samples];
        let mut mean_states = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            for j in 0..3 {
                let s: f64 = groups.iter().map(|g| g.scalar_sum[i][j]).sum();
                let sq: f64 = groups.iter().map(|g| g.scalar_sq_sum[i][j]).sum();
                let m = s / nf;
                let var = ((sq - nf * m * m) / (nf - 1.0)).max(0.0);
                mean[j][i] = m;
                se[j][i] = libm::sqrt(var / nf);
            }
            let mut total = groups[0].state_sum[i].clone();
            for g in &groups[1..] {
                total += &g.state_sum[i];
            }
            let avg = DensityMatrix::new(total.map(|z| z / nf))?;
            log_neg[i] = log_negativity(&avg, split)?;
            let k = groups.len();
            if k >= 2 {
                let mut thetas = Vec::with_capacity(k);
                for g in groups {
                    let rest = (&total - &g.state_sum[i]).map(|z| z / (nf - g.n_traj as f64));
                    thetas.push(log_negativity(&DensityMatrix::new(rest)?, split)?);
                }
                let tbar = thetas.iter().sum::<f64>() / k as f64;
                let ss: f64 = thetas.iter().map(|t| (t - tbar) * (t - tbar)).sum();
                se_log_neg[i] = libm::sqrt((k as f64 - 1.0) / k as f64 * ss);
            }
            mean_states.push(avg);
        }
        let mut stats = SolverStats::default();
        for g in groups {
            stats += g.stats;
        }
        let [mean_n1, mean_n2, mean_purity] = mean;
        let [se_n1, se_n2, se_purity] = se;
        Ok(EnsembleStats {
            n_traj: n,
            times: self.grid.times(),
            mean_n1,
            mean_n2,
            mean_purity,
            se_n1,
            se_n2,
            se_purity,
            log_neg,
            se_log_neg,
            mean_states,
            min_eig: groups.iter().map(|g| g.min_eig).fold(f64::INFINITY, f64::min),
            max_trace_err: groups.iter().map(|g| g.max_trace_err).fold(0.0, f64::max),
            mean_arrivals: groups.iter().map(|g| g.arrivals).sum::<usize>() as f64 / nf,
            stats,
        })
    }

    /// Sequential run of all groups.
    pub fn run(&self) -> Result<EnsembleStats> {
        let groups = (0..self.n_groups()).map(|g| self.run_group(g)).collect::<Result<Vec<_>>>()?;
        self.combine(&groups)
    }
}

/// Ensemble mean over `n_traj` trajectories seeded from `proc.seed`.
///
/// `proc.rate` overrides `params.r` for the arrivals; the horizon is the
/// grid's end time.
pub fn ensemble_average(
    atom: &AtomPreparation,
    rho0: &DensityMatrix,
    params: &InteractionParams,
    proc: &ArrivalProcess,
    grid: &TimeGrid,
    n_traj: usize,
    config: &SolverConfig,
) -> Result<EnsembleStats> {
    let seeds = (0..n_traj as u64).map(|i| trajectory_seed(proc.seed, i)).collect();
    ensemble_average_with_seeds(atom, rho0, params, proc.rate, grid, seeds, config)
}

pub fn ensemble_average_with_seeds(
    atom: &AtomPreparation,
    rho0: &DensityMatrix,
    params: &InteractionParams,
    rate: f64,
    grid: &TimeGrid,
    seeds: Vec<u64>,
    config: &SolverConfig,
) -> Result<EnsembleStats> {
    let mut ens = Ensemble::new(atom, rho0, params, grid, seeds, config)?;
    ens.rate = rate;
    ens.run()
}
