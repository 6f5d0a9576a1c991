//! Time integration of `ρ̇ = G(ρ)`.
//!
//! The integrator is the Dormand–Prince 5(4) embedded pair with FSAL and a
//! standard step-size controller, acting directly on the dense matrix. After
//! every accepted step the state is re-symmetrized; positivity is only
//! monitored.

use alloc::vec;
use alloc::vec::Vec;

use crate::atom_field::{AtomPreparation, CollisionMap, InteractionParams};
use crate::entanglement::{observe, ObservableRecord};
use crate::hilbert::{validate_state, DensityMatrix, FockCutoff, StateDiagnostics, Tolerances};
use crate::linalg::{frobenius_norm, symmetrize_in_place};
use crate::master_eq::{Generator, GeneratorSpec, Liouvillian};
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `None` picks [`default_max_step`].
    pub max_step: Option<f64>,
    /// Full validation (spectrum of ρ and the abort checks) every k samples.
    pub validation_cadence: usize,
    /// Keep every sampled state in the trajectory.
    pub retain_states: bool,
    pub tolerances: Tolerances,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
            validation_cadence: 1,
            retain_states: false,
            tolerances: Tolerances::default(),
            max_steps: 50_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidSolver("tolerances must be positive"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::InvalidSolver("max_step must be positive"));
            }
        }
        if self.validation_cadence == 0 {
            return Err(Error::InvalidSolver("validation_cadence must be at least 1"));
        }
        Ok(())
    }
}

/// `0.1/r`, or `0.1/max(κ₁, κ₂)` without atoms.
///
/// The Rabi frequencies only enter through the cached collision map, so they
/// do not set a timescale of the coarse-grained flow; the fastest rate of
/// `r[M − 1]` is bounded by `2r`.
pub fn default_max_step(params: &InteractionParams) -> f64 {
    if params.r > 0.0 {
        return 0.1 / params.r;
    }
    let kappa = params.kappa1.max(params.kappa2);
    if kappa > 0.0 {
        0.1 / kappa
    } else {
        f64::INFINITY
    }
}

/// Uniform sampling grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        let g = TimeGrid {
            t_start,
            t_end,
            n_samples,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end <= self.t_start {
            return Err(Error::InvalidGrid("t_end must exceed t_start"));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidGrid("need at least two samples"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_samples {
            self.t_end
        } else {
            self.t_start + i as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.time(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl core::ops::AddAssign for SolverStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

/// Sampled solution of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Option<Vec<DensityMatrix>>,
    pub observables: Vec<ObservableRecord>,
    pub diagnostics: Vec<StateDiagnostics>,
    pub final_state: DensityMatrix,
    /// False once the boundary population exceeded the leakage tolerance.
    pub converged: bool,
    pub stats: SolverStats,
}

impl Trajectory {
    /// `(t, E_N)` at the sample with the largest negativity.
    pub fn peak_log_neg(&self) -> (f64, f64) {
        self.observables
            .iter()
            .fold((self.times[0], f64::NEG_INFINITY), |best, o| {
                if o.log_neg > best.1 {
                    (o.t, o.log_neg)
                } else {
                    best
                }
            })
    }

    pub fn max_leakage(&self) -> f64 {
        self.observables.iter().map(|o| o.leakage).fold(0.0, f64::max)
    }

    pub fn max_trace_err(&self) -> f64 {
        self.observables.iter().map(|o| o.trace_err).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over the validated samples.
    pub fn min_eigenvalue(&self) -> f64 {
        self.observables
            .iter()
            .map(|o| o.min_eig)
            .filter(|x| !x.is_nan())
            .fold(f64::INFINITY, f64::min)
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
// local error target relative to the requested tolerances; keeps the global
// error of long runs inside rel_tol
const LOCAL_TOL_FRACTION: f64 = 0.1;
const GROW_MAX: f64 = 5.0;
const SHRINK_MIN: f64 = 0.2;

/// Reusable adaptive stepper for one generator.
pub struct AdaptiveStepper<'a, L: Liouvillian + ?Sized> {
    gen: &'a L,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    max_steps: usize,
    h: f64,
    k: [CMatrix; 7],
    stage: CMatrix,
    pub stats: SolverStats,
}

impl<'a, L: Liouvillian + ?Sized> AdaptiveStepper<'a, L> {
    pub fn new(gen: &'a L, config: &SolverConfig, max_step: f64) -> Self {
        let d = gen.dim();
        AdaptiveStepper {
            gen,
            rel_tol: config.rel_tol * LOCAL_TOL_FRACTION,
            abs_tol: config.abs_tol * LOCAL_TOL_FRACTION,
            max_step,
            max_steps: config.max_steps,
            h: f64::NAN,
            k: core::array::from_fn(|_| CMatrix::zeros(d, d)),
            stage: CMatrix::zeros(d, d),
            stats: SolverStats::default(),
        }
    }

    fn eval(&mut self, into: usize) {
        self.gen.apply_into(&self.stage, &mut self.k[into]);
        self.stats.evaluations += 1;
    }

    /// Advances `rho` from `t0` to `t1` in place.
    pub fn advance(&mut self, rho: &mut CMatrix, t0: f64, t1: f64) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        self.stage.copy_from(rho);
        self.eval(0);
        if !self.h.is_finite() {
            self.h = self.initial_step(rho, t1 - t0);
        }
        let mut t = t0;
        while t < t1 {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(Error::StepBudget { t, limit: self.max_steps });
            }
            let remaining = t1 - t;
            let mut h = self.h.min(self.max_step);
            // stretch onto t1 rather than leaving a round-off sized remainder
            let clipped = h >= remaining - 1e-12 * t1.abs().max(1.0);
            if clipped {
                h = remaining;
            }
            if h <= 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            let err = self.try_step(rho, h);
            let factor = if err == 0.0 {
                GROW_MAX
            } else {
                (SAFETY * libm::pow(err, -0.2)).clamp(SHRINK_MIN, GROW_MAX)
            };
            if err <= 1.0 {
                self.stats.accepted += 1;
                t = if clipped { t1 } else { t + h };
                // y_{n+1} sits in `stage`, f(y_{n+1}) in k[6]
                symmetrize_in_place(&mut self.stage);
                symmetrize_in_place(&mut self.k[6]);
                rho.copy_from(&self.stage);
                self.k.swap(0, 6);
                let proposal = h * factor;
                self.h = if clipped { self.h.max(proposal) } else { proposal };
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
                self.stage.copy_from(rho);
            }
        }
        Ok(())
    }

    fn initial_step(&self, rho: &CMatrix, span: f64) -> f64 {
        let scale = frobenius_norm(rho).max(self.abs_tol);
        let rate = frobenius_norm(&self.k[0]) / scale;
        let guess = if rate > 0.0 {
            0.01 * libm::pow(self.rel_tol, 0.2) / rate * 10.0
        } else {
            span
        };
        guess.min(span).min(self.max_step)
    }

    /// One trial step of size `h` from `rho` (with `k[0] = f(rho)`). Leaves
    /// the candidate in `stage` and returns the scaled error norm.
    fn try_step(&mut self, rho: &CMatrix, h: f64) -> f64 {
        let n = rho.len();
        for s in 1..7 {
            {
                let y = rho.as_slice();
                let out = self.stage.as_mut_slice();
                out.copy_from_slice(y);
                for (j, &a) in A[s].iter().enumerate().take(s) {
                    if a != 0.0 {
                        let w = h * a;
                        let kj = self.k[j].as_slice();
                        for i in 0..n {
                            out[i] += kj[i] * w;
                        }
                    }
                }
            }
            let _ = C[s];
            self.eval(s);
        }
        // stage already holds the fifth-order solution (row 6 = b weights)
        let y = rho.as_slice();
        let y_new = self.stage.as_slice();
        let mut acc = 0.0;
        for i in 0..n {
            let mut e = C64::new(0.0, 0.0);
            for (s, &w) in E.iter().enumerate() {
                if w != 0.0 {
                    e += self.k[s].as_slice()[i] * w;
                }
            }
            let sc = self.abs_tol + self.rel_tol * y[i].norm().max(y_new[i].norm());
            acc += (e * h).norm_sqr() / (sc * sc);
        }
        libm::sqrt(acc / n as f64)
    }
}

fn state_check(t: f64, diag: &StateDiagnostics, tol: &Tolerances) -> Result<()> {
    match diag.violation(tol) {
        Some((invariant, value, tolerance)) => Err(Error::Validation {
            t,
            invariant,
            value,
            tolerance,
        }),
        None => Ok(()),
    }
}

/// Integrates an arbitrary generator over `grid`.
pub fn integrate_with<L: Liouvillian + ?Sized>(
    gen: &L,
    cutoff: FockCutoff,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    config: &SolverConfig,
    max_step: f64,
) -> Result<Trajectory> {
    config.validate()?;
    grid.validate()?;
    let tol = config.tolerances;
    state_check(grid.t_start, &validate_state(rho0, cutoff)?, &tol)?;

    let mut stepper = AdaptiveStepper::new(gen, config, max_step);
    let mut rho = rho0.clone().into_inner();
    let times = grid.times();
    let mut observables = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());
    let mut states = config.retain_states.then(|| Vec::with_capacity(times.len()));
    let mut converged = true;

    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            stepper.advance(&mut rho, times[i - 1], t)?;
        }
        let validated = i % config.validation_cadence == 0 || i + 1 == times.len();
        let state = DensityMatrix::new(rho.clone())?;
        let rec = observe(t, &state, cutoff, validated)?;
        let diag = StateDiagnostics {
            trace_err: rec.trace_err,
            herm_err: crate::linalg::hermiticity_error(&state),
            min_eig: rec.min_eig,
            leakage: rec.leakage,
        };
        if validated {
            state_check(t, &diag, &tol)?;
        }
        if diag.leaks(&tol) {
            converged = false;
        }
        observables.push(rec);
        diagnostics.push(diag);
        if let Some(s) = states.as_mut() {
            s.push(state);
        }
    }
    Ok(Trajectory {
        times,
        states,
        observables,
        diagnostics,
        final_state: DensityMatrix::new(rho)?,
        converged,
        stats: stepper.stats,
    })
}

fn resolved_max_step(spec: &GeneratorSpec, config: &SolverConfig) -> f64 {
    config
        .max_step
        .unwrap_or_else(|| default_max_step(&spec.params))
}

/// Integrates the generator described by `spec`.
pub fn integrate(spec: &GeneratorSpec, rho0: &DensityMatrix, grid: &TimeGrid, config: &SolverConfig) -> Result<Trajectory> {
    let gen = Generator::new(spec)?;
    integrate_with(&gen, spec.cutoff, rho0, grid, config, resolved_max_step(spec, config))
}

/// One Euler-like step of the discrete collision process: with probability
/// `r·dt` an atom passes, otherwise nothing happens.
pub fn discrete_update(
    atom: &AtomPreparation,
    rho: &DensityMatrix,
    params: &InteractionParams,
    dt: f64,
) -> Result<DensityMatrix> {
    let cutoff = FockCutoff::from_field_dim(rho.dim())?;
    let map = CollisionMap::new(atom, params, params.tau, cutoff)?;
    discrete_update_with(&map, params.r, rho, dt)
}

/// [`discrete_update`] with a prebuilt collision map.
pub fn discrete_update_with(map: &CollisionMap, r: f64, rho: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    let p = r * dt;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOverflow(p));
    }
    let mut out = &**rho * C64::new(1.0 - p, 0.0);
    if p > 0.0 {
        map.apply_acc(rho, p, &mut out);
    }
    DensityMatrix::new(out)
}

/// Integrates to `horizon` and reports the final state with the stationarity
/// residual `‖G(ρ_final)‖_F`.
pub fn steady_state_probe(
    spec: &GeneratorSpec,
    rho0: &DensityMatrix,
    horizon: f64,
    config: &SolverConfig,
) -> Result<(DensityMatrix, f64)> {
    let gen = Generator::new(spec)?;
    let grid = TimeGrid::new(0.0, horizon, 2)?;
    let traj = integrate_with(&gen, spec.cutoff, rho0, &grid, config, resolved_max_step(spec, config))?;
    let last = traj.final_state;
    let residual = frobenius_norm(&gen.apply(&last));
    Ok((last, residual))
}

/// One observable per sample.
pub fn sample_series(traj: &Trajectory, f: impl Fn(&ObservableRecord) -> f64) -> Vec<f64> {
    let mut v = vec![0.0; traj.observables.len()];
    for (slot, o) in v.iter_mut().zip(&traj.observables) {
        *slot = f(o);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::fock_state;
    use crate::master_eq::{LindbladGenerator, Variant};
    use approx::assert_abs_diff_eq;

    fn lossy(kappa1: f64) -> InteractionParams {
        InteractionParams {
            g1: 0.0,
            g2: 0.0,
            r: 0.0,
            tau: 1.0,
            kappa1,
            kappa2: 0.0,
            omega0: 1e10,
        }
    }

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn grid_and_config_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
        let g = TimeGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let mut c = SolverConfig::default();
        c.rel_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.validation_cadence = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_generator_keeps_state() {
        let c = cut(3);
        let gen = LindbladGenerator::new(c.dim());
        let rho0 = fock_state(1, 0, c).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 6).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.retain_states = true;
        let traj = integrate_with(&gen, c, &rho0, &grid, &cfg, 1.0).unwrap();
        for s in traj.states.unwrap() {
            assert_eq!(s, rho0);
        }
        assert!(traj.converged);
    }

    #[test]
    fn single_photon_decay() {
        let c = cut(3);
        let kappa = 0.3;
        let spec = GeneratorSpec {
            variant: Variant::ExactMap,
            params: lossy(kappa),
            atom: AtomPreparation::new(0.0, 0.0, 1.0, 0.0, 0.0).unwrap(),
            cutoff: c,
        };
        let grid = TimeGrid::new(0.0, 20.0, 41).unwrap();
        let cfg = SolverConfig::default();
        let traj = integrate(&spec, &fock_state(1, 0, c).unwrap(), &grid, &cfg).unwrap();
        for o in &traj.observables {
            let want = libm::exp(-kappa * o.t);
            assert!((o.n1 - want).abs() <= cfg.rel_tol * want + 1e-10, "t={} {} vs {}", o.t, o.n1, want);
        }
    }

    #[test]
    fn invalid_initial_state_aborts() {
        let c = cut(2);
        let bad = DensityMatrix::new(fock_state(0, 0, c).unwrap().into_inner() * C64::new(2.0, 0.0)).unwrap();
        let gen = LindbladGenerator::new(c.dim());
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let err = integrate_with(&gen, c, &bad, &grid, &SolverConfig::default(), 1.0).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn discrete_update_limits() {
        let c = cut(3);
        let p = InteractionParams {
            g1: 0.09,
            g2: 0.05,
            r: 0.1,
            tau: 1.0,
            kappa1: 0.0,
            kappa2: 0.0,
            omega0: 1e10,
        };
        let atom = AtomPreparation::with_max_coherence(0.5, 0.3, 0.2, 0.8).unwrap();
        let rho = fock_state(1, 1, c).unwrap();
        assert_eq!(discrete_update(&atom, &rho, &p, 0.0).unwrap(), rho);
        let full = discrete_update(&atom, &rho, &p, 10.0).unwrap();
        let mapped = crate::atom_field::apply_collision_map(&atom, &rho, &p, 1.0).unwrap();
        assert_eq!(full, mapped);
        assert!(matches!(discrete_update(&atom, &rho, &p, 10.5), Err(Error::ProbabilityOverflow(_))));
    }

    #[test]
    fn steady_state_of_pure_loss_is_vacuum() {
        let c = cut(3);
        let spec = GeneratorSpec {
            variant: Variant::SecondOrder,
            params: InteractionParams { kappa2: 0.5, ..lossy(0.5) },
            atom: AtomPreparation::new(0.0, 0.0, 1.0, 0.0, 0.0).unwrap(),
            cutoff: c,
        };
        let (rho, residual) = steady_state_probe(&spec, &fock_state(2, 1, c).unwrap(), 80.0, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(rho[(0, 0)].re, 1.0, epsilon = 1e-8);
        assert!(residual <= 1e-8, "residual {residual:e}");
    }
}
