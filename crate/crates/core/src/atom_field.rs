//! The single-atom collision.
//!
//! An atom with levels `(e₁, e₂, g)` crosses the cavity in a time τ and
//! couples `e₁ ↔ g` to mode 1 and `e₂ ↔ g` to mode 2. The interaction
//! conserves `N_exc = n₁ + n₂ + |e₁⟩⟨e₁| + |e₂⟩⟨e₂|`, so the propagator splits
//! into 3×3 blocks labelled by the ground-state partner `|g, m, n⟩`:
//!
//! ```text
//! span{ |e₁, m−1, n⟩, |e₂, m, n−1⟩, |g, m, n⟩ },  c₁ = g₁√m, c₂ = g₂√n, Ω = √(c₁² + c₂²)
//! ```
//!
//! The closed form used here was derived from `exp(−i H_I τ)` and is checked
//! against a numeric eigendecomposition ([`propagator_numeric`]). It differs
//! from the commonly quoted printed form, which uses
//! `λ = √((g₁²m + g₂²n)/2)` together with mixed `sin(λτ)`/`sin(λτ/2)`
//! arguments; that matrix is not unitary.

use alloc::vec::Vec;

use crate::hilbert::{DensityMatrix, FockCutoff, OperatorMatrix};
use crate::linalg::{Entries, HermitianEigen, ShiftOp};
use crate::{CMatrix, Error, Result, C64};

const SUM_TOL: f64 = 1e-12;

/// Atomic levels in the fixed global ordering `(e₁, e₂, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomLevel {
    E1 = 0,
    E2 = 1,
    G = 2,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 3] = [AtomLevel::E1, AtomLevel::E2, AtomLevel::G];
}

/// Initial atomic state
///
/// ```text
///        ⎛ p_e1  χξ    0  ⎞
/// ρ_A =  ⎜ χξ    p_e2  0  ⎟
///        ⎝ 0     0    p_g ⎠
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomPreparation {
    pub p_e1: f64,
    pub p_e2: f64,
    pub p_g: f64,
    /// Real coherence amplitude between the upper levels.
    pub chi: f64,
    /// Dephasing factor attenuating `chi`.
    pub xi: f64,
}

impl AtomPreparation {
    pub fn new(p_e1: f64, p_e2: f64, p_g: f64, chi: f64, xi: f64) -> Result<Self> {
        let atom = AtomPreparation {
            p_e1,
            p_e2,
            p_g,
            chi,
            xi,
        };
        atom.validate()?;
        Ok(atom)
    }

    /// Preparation carrying the largest coherence the populations allow,
    /// `χ = √(p_e1 p_e2)`.
    pub fn with_max_coherence(p_e1: f64, p_e2: f64, p_g: f64, xi: f64) -> Result<Self> {
        AtomPreparation::new(p_e1, p_e2, p_g, libm::sqrt(p_e1 * p_e2), xi)
    }

    pub fn validate(&self) -> Result<()> {
        let p = [self.p_e1, self.p_e2, self.p_g];
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidAtom("populations must lie in [0, 1]"));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidAtom("populations must sum to 1"));
        }
        if !self.chi.is_finite() || self.chi.abs() > libm::sqrt(self.p_e1 * self.p_e2) * (1.0 + SUM_TOL) {
            return Err(Error::InvalidAtom("|chi| must not exceed sqrt(p_e1 * p_e2)"));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::InvalidAtom("xi must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Effective upper-level coherence `χξ`.
    pub fn coherence(&self) -> f64 {
        self.chi * self.xi
    }

    /// ρ_A in the `(e₁, e₂, g)` basis.
    pub fn density_matrix(&self) -> [[f64; 3]; 3] {
        let c = self.coherence();
        [[self.p_e1, c, 0.0], [c, self.p_e2, 0.0], [0.0, 0.0, self.p_g]]
    }

    /// Exchanges the roles of the two excited levels.
    pub fn swap_modes(&self) -> Self {
        AtomPreparation {
            p_e1: self.p_e2,
            p_e2: self.p_e1,
            ..*self
        }
    }
}

/// Couplings, rates and times, all dimensionless in units of ω₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionParams {
    pub g1: f64,
    pub g2: f64,
    /// Mean atom arrival rate.
    pub r: f64,
    /// Flight time through the cavity.
    pub tau: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Physical value of the frequency unit, in Hz. Informational only.
    pub omega0: f64,
}

impl InteractionParams {
    /// Converts physical values (Hz and seconds) to ω₀ units.
    #[allow(clippy::too_many_arguments)]
    pub fn from_physical(g1: f64, g2: f64, r: f64, tau_s: f64, kappa1: f64, kappa2: f64, omega0: f64) -> Result<Self> {
        let p = InteractionParams {
            g1: g1 / omega0,
            g2: g2 / omega0,
            r: r / omega0,
            tau: tau_s * omega0,
            kappa1: kappa1 / omega0,
            kappa2: kappa2 / omega0,
            omega0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.g1, self.g2, self.r, self.tau, self.kappa1, self.kappa2, self.omega0];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParams("all parameters must be finite and nonnegative"));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParams("tau must be positive"));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidParams("omega0 must be positive"));
        }
        Ok(())
    }

    /// Exchanges every mode-labelled parameter.
    pub fn swap_modes(&self) -> Self {
        InteractionParams {
            g1: self.g2,
            g2: self.g1,
            kappa1: self.kappa2,
            kappa2: self.kappa1,
            ..*self
        }
    }

    /// Largest block Rabi frequency reachable inside the cutoff.
    pub fn max_rabi_frequency(&self, cutoff: FockCutoff) -> f64 {
        let n = cutoff.n_max() as f64;
        libm::sqrt((self.g1 * self.g1 + self.g2 * self.g2) * n)
    }
}

/// Index of `|level, m, n⟩` in the atom ⊗ field space (atom-major).
pub fn joint_index(level: AtomLevel, m: usize, n: usize, cutoff: FockCutoff) -> usize {
    level as usize * cutoff.dim() + cutoff.index(m, n)
}

/// `H_I = g₁(a₁|e₁⟩⟨g| + a₁†|g⟩⟨e₁|) + g₂(a₂|e₂⟩⟨g| + a₂†|g⟩⟨e₂|)` on the
/// `3d²`-dimensional atom ⊗ field space.
pub fn interaction_hamiltonian(params: &InteractionParams, cutoff: FockCutoff) -> OperatorMatrix {
    let dim = 3 * cutoff.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for m in 0..=cutoff.n_max() {
        for n in 0..=cutoff.n_max() {
            let g = joint_index(AtomLevel::G, m, n, cutoff);
            if m > 0 {
                let e = joint_index(AtomLevel::E1, m - 1, n, cutoff);
                let v = C64::new(params.g1 * libm::sqrt(m as f64), 0.0);
                h[(e, g)] = v;
                h[(g, e)] = v;
            }
            if n > 0 {
                let e = joint_index(AtomLevel::E2, m, n - 1, cutoff);
                let v = C64::new(params.g2 * libm::sqrt(n as f64), 0.0);
                h[(e, g)] = v;
                h[(g, e)] = v;
            }
        }
    }
    OperatorMatrix::new(h).expect("finite couplings")
}

/// Spectral decomposition of `H_I`, reusable across flight times.
#[derive(Debug, Clone)]
pub struct NumericPropagator {
    eig: HermitianEigen,
}

impl NumericPropagator {
    pub fn new(params: &InteractionParams, cutoff: FockCutoff) -> Self {
        NumericPropagator {
            eig: HermitianEigen::new(&interaction_hamiltonian(params, cutoff)),
        }
    }

    pub fn at(&self, tau: f64) -> OperatorMatrix {
        OperatorMatrix::new(self.eig.exp_neg_i(tau)).expect("finite propagator")
    }
}

/// `exp(−i H_I τ)` by eigendecomposition of the Hermitian `H_I`.
pub fn propagator_numeric(params: &InteractionParams, cutoff: FockCutoff, tau: f64) -> OperatorMatrix {
    NumericPropagator::new(params, cutoff).at(tau)
}

/// Exact 3×3 propagator on the block of `|g, m, n⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorBlock {
    pub m: usize,
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub omega: f64,
    /// Rows/columns ordered `|e₁, m−1, n⟩, |e₂, m, n−1⟩, |g, m, n⟩`.
    pub u: [[C64; 3]; 3],
}

impl PropagatorBlock {
    /// Basis states of the block; `None` where an occupation would be −1.
    pub fn states(&self) -> [Option<(AtomLevel, usize, usize)>; 3] {
        [
            (self.m > 0).then(|| (AtomLevel::E1, self.m - 1, self.n)),
            (self.n > 0).then(|| (AtomLevel::E2, self.m, self.n - 1)),
            Some((AtomLevel::G, self.m, self.n)),
        ]
    }
}

/// Closed-form block propagator. Rows and columns whose states do not exist
/// are identity-decoupled (their couplings vanish) and are reported as
/// absent by [`PropagatorBlock::states`].
pub fn propagator_block(m: usize, n: usize, params: &InteractionParams, tau: f64) -> PropagatorBlock {
    let c1 = params.g1 * libm::sqrt(m as f64);
    let c2 = params.g2 * libm::sqrt(n as f64);
    let omega = libm::sqrt(c1 * c1 + c2 * c2);
    let zero = C64::new(0.0, 0.0);
    let re = |x: f64| C64::new(x, 0.0);
    let mut u = [[zero; 3]; 3];
    if omega == 0.0 {
        for (i, row) in u.iter_mut().enumerate() {
            row[i] = re(1.0);
        }
    } else {
        let theta = omega * tau;
        let cos = libm::cos(theta);
        // cos θ − 1 without cancellation
        let half = libm::sin(0.5 * theta);
        let cm1 = -2.0 * half * half;
        let s = libm::sin(theta) / omega;
        let w2 = omega * omega;
        u[0][0] = re(1.0 + cm1 * c1 * c1 / w2);
        u[1][1] = re(1.0 + cm1 * c2 * c2 / w2);
        u[0][1] = re(cm1 * c1 * c2 / w2);
        u[1][0] = u[0][1];
        u[0][2] = C64::new(0.0, -c1 * s);
        u[1][2] = C64::new(0.0, -c2 * s);
        u[2][0] = u[0][2];
        u[2][1] = u[1][2];
        u[2][2] = re(cos);
    }
    PropagatorBlock { m, n, c1, c2, omega, u }
}

/// Collision superoperator `M(τ)ρ = Tr_A[U(τ)(ρ_A ⊗ ρ)U(τ)†]`.
///
/// The propagator is stored as nine sparse field operators
/// `U_ab = ⟨a|U|b⟩`, assembled once from the closed-form blocks, so that
/// `M(τ)ρ = Σ_a Σ_bc (ρ_A)_bc U_ab ρ U_ac†`.
///
/// Excited states with `n_max` photons already in their mode have no
/// in-space partner; the truncated dynamics leaves them untouched
/// (clipped 1×1 blocks). This keeps the map exactly trace preserving, and the
/// affected population is what [`crate::hilbert::leakage`] reports.
#[derive(Debug, Clone)]
pub struct CollisionMap {
    cutoff: FockCutoff,
    pieces: [[ShiftOp; 3]; 3],
    weights: Vec<(usize, usize, f64)>,
}

impl CollisionMap {
    pub fn new(atom: &AtomPreparation, params: &InteractionParams, tau: f64, cutoff: FockCutoff) -> Result<Self> {
        atom.validate()?;
        params.validate()?;
        let dim = cutoff.dim();
        let top = cutoff.n_max();
        let mut cols: [[Vec<Option<(usize, C64)>>; 3]; 3] = Default::default();
        for row in cols.iter_mut() {
            for slot in row.iter_mut() {
                slot.resize(dim, None);
            }
        }
        for m in 0..=top {
            for n in 0..=top {
                let block = propagator_block(m, n, params, tau);
                let states = block.states();
                for (j, sj) in states.iter().enumerate() {
                    let Some((lj, mj, nj)) = *sj else { continue };
                    for (i, si) in states.iter().enumerate() {
                        let Some((li, mi, ni)) = *si else { continue };
                        let v = block.u[i][j];
                        if v != C64::new(0.0, 0.0) {
                            cols[li as usize][lj as usize][cutoff.index(mj, nj)] = Some((cutoff.index(mi, ni), v));
                        }
                    }
                }
            }
        }
        for k in 0..=top {
            let e1 = cutoff.index(top, k);
            cols[0][0][e1] = Some((e1, C64::new(1.0, 0.0)));
            let e2 = cutoff.index(k, top);
            cols[1][1][e2] = Some((e2, C64::new(1.0, 0.0)));
        }
        let pieces = cols.map(|row| row.map(|c| ShiftOp::from_fn(dim, |j| c[j])));

        let rho_a = atom.density_matrix();
        let mut weights = Vec::new();
        for (b, row) in rho_a.iter().enumerate() {
            for (c, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    weights.push((b, c, w));
                }
            }
        }
        Ok(CollisionMap { cutoff, pieces, weights })
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Atom-resolved propagator piece `⟨a|U|b⟩` on the field.
    pub fn piece(&self, a: AtomLevel, b: AtomLevel) -> &ShiftOp {
        &self.pieces[a as usize][b as usize]
    }

    /// The full (clipped) propagator on atom ⊗ field, assembled densely.
    pub fn propagator_dense(&self) -> CMatrix {
        let d2 = self.cutoff.dim();
        let mut u = CMatrix::zeros(3 * d2, 3 * d2);
        for a in AtomLevel::ALL {
            for b in AtomLevel::ALL {
                let p = self.piece(a, b);
                for j in 0..d2 {
                    if let Some((i, c)) = p.column(j) {
                        u[(a as usize * d2 + i, b as usize * d2 + j)] = c;
                    }
                }
            }
        }
        u
    }

    /// Accumulates `scale · M(τ)ρ` into `out`.
    pub fn apply_acc(&self, rho: &CMatrix, scale: f64, out: &mut CMatrix) {
        self.apply_entries_acc(&Entries::of(rho), scale, out);
    }

    /// [`Self::apply_acc`] over precomputed nonzero entries of ρ.
    pub fn apply_entries_acc(&self, rho: &Entries, scale: f64, out: &mut CMatrix) {
        for row in &self.pieces {
            for &(b, c, w) in &self.weights {
                row[b].sandwich_entries_acc(rho, &row[c], C64::new(w * scale, 0.0), out);
            }
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        self.apply_acc(rho, 1.0, &mut out);
        out
    }
}

/// One collision: `Tr_A[U(τ)(ρ_A ⊗ ρ_F)U(τ)†]`.
pub fn apply_collision_map(
    atom: &AtomPreparation,
    rho_f: &DensityMatrix,
    params: &InteractionParams,
    tau: f64,
) -> Result<DensityMatrix> {
    let cutoff = FockCutoff::from_field_dim(rho_f.dim())?;
    let map = CollisionMap::new(atom, params, tau, cutoff)?;
    DensityMatrix::new(map.apply(rho_f))
}

/// Largest entrywise deviation between the assembled closed-form propagator
/// and the numeric exponential, over the given flight times.
pub fn block_deviation(params: &InteractionParams, cutoff: FockCutoff, taus: &[f64]) -> Result<f64> {
    let numeric = NumericPropagator::new(params, cutoff);
    let atom = AtomPreparation::new(1.0, 0.0, 0.0, 0.0, 0.0)?;
    let mut worst: f64 = 0.0;
    for &tau in taus {
        let analytic = CollisionMap::new(&atom, params, tau, cutoff)?.propagator_dense();
        worst = worst.max(crate::linalg::max_abs_diff(&analytic, &numeric.at(tau)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_state, Mode};
    use crate::linalg::{max_abs_diff, trace};
    use approx::assert_abs_diff_eq;

    fn params(g1: f64, g2: f64) -> InteractionParams {
        InteractionParams {
            g1,
            g2,
            r: 0.1,
            tau: 1.0,
            kappa1: 0.0,
            kappa2: 0.0,
            omega0: 1e10,
        }
    }

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn atom_validation() {
        assert!(AtomPreparation::new(0.5, 0.25, 0.25, 0.35, 0.7).is_ok());
        assert!(AtomPreparation::new(0.5, 0.25, 0.3, 0.0, 0.7).is_err());
        assert!(AtomPreparation::new(1.2, -0.2, 0.0, 0.0, 0.7).is_err());
        assert!(AtomPreparation::new(0.5, 0.25, 0.25, 0.36, 0.7).is_err());
        assert!(AtomPreparation::new(0.5, 0.25, 0.25, 0.0, 1.5).is_err());
        let a = AtomPreparation::with_max_coherence(5.0 / 8.0, 5.0 / 16.0, 1.0 / 16.0, 0.7).unwrap();
        assert_abs_diff_eq!(a.chi, (25.0f64 / 128.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn physical_units_convert_to_omega0() {
        let p = InteractionParams::from_physical(9e8, 5e8, 1e9, 1e-10, 1e4, 2e4, 1e10).unwrap();
        assert_abs_diff_eq!(p.g1, 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(p.g2, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(p.r, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p.tau, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.kappa1, 1e-6, epsilon = 1e-20);
        assert_abs_diff_eq!(p.kappa2, 2e-6, epsilon = 1e-20);
        let mut bad = p;
        bad.tau = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hamiltonian_elements() {
        let c = cut(3);
        assert_eq!(*interaction_hamiltonian(&params(0.0, 0.0), c), CMatrix::zeros(48, 48));
        let p = params(0.09, 0.05);
        let h = interaction_hamiltonian(&p, c);
        assert_eq!(*h, h.adjoint());
        let g10 = joint_index(AtomLevel::G, 1, 0, c);
        let e100 = joint_index(AtomLevel::E1, 0, 0, c);
        assert_eq!(h[(g10, e100)].re, 0.09);
    }

    #[test]
    fn numeric_propagator_basics() {
        let c = cut(3);
        let p = params(0.09, 0.05);
        assert!(max_abs_diff(&propagator_numeric(&p, c, 0.0), &CMatrix::identity(48, 48)) < 1e-13);
        let u = propagator_numeric(&p, c, 2.5);
        assert!(max_abs_diff(&(&*u * u.adjoint()), &CMatrix::identity(48, 48)) < 1e-12);
        let vac = joint_index(AtomLevel::G, 0, 0, c);
        for i in 0..48 {
            let want = if i == vac { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(u[(i, vac)].norm(), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn block_examples() {
        let p = params(0.09, 0.05);
        let b = propagator_block(2, 1, &p, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.u[i][j].re, if i == j { 1.0 } else { 0.0 });
            }
        }
        // n = 0 reduces to single-mode Rabi oscillation
        let b = propagator_block(4, 0, &p, 1.7);
        assert_abs_diff_eq!(b.u[2][2].re, (0.09 * 2.0 * 1.7f64).cos(), epsilon = 1e-15);
        let q = params(0.07, 0.07);
        let b = propagator_block(1, 1, &q, 3.0);
        assert_abs_diff_eq!(b.omega, 0.07 * 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.u[2][2].re, (0.07 * 2f64.sqrt() * 3.0).cos(), epsilon = 1e-15);
        let u = nalgebra::Matrix3::from_fn(|i, j| b.u[i][j]);
        assert!((u * u.adjoint() - nalgebra::Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn closed_form_matches_numeric_exponential() {
        let c = cut(5);
        let p = params(0.09, 0.05);
        let dev = block_deviation(&p, c, &[0.1, 1.0, 5.0, 40.0]).unwrap();
        assert!(dev < 1e-10, "deviation {dev:e}");
    }

    #[test]
    fn propagator_conserves_excitations() {
        let c = cut(4);
        let p = params(0.09, 0.05);
        let u = propagator_numeric(&p, c, 3.0);
        let d2 = c.dim();
        let n_exc = CMatrix::from_fn(3 * d2, 3 * d2, |i, j| {
            if i != j {
                return C64::new(0.0, 0.0);
            }
            let (m, n) = c.occupations(i % d2);
            let atom = if i / d2 == AtomLevel::G as usize { 0 } else { 1 };
            C64::new((m + n + atom) as f64, 0.0)
        });
        let comm = &*u * &n_exc - &n_exc * &*u;
        for i in 0..3 * d2 {
            for j in 0..3 * d2 {
                if n_exc[(i, i)].re <= c.n_max() as f64 && n_exc[(j, j)].re <= c.n_max() as f64 {
                    assert!(comm[(i, j)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ground_atom_leaves_vacuum_alone() {
        let c = cut(3);
        let atom = AtomPreparation::new(0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let vac = fock_state(0, 0, c).unwrap();
        let out = apply_collision_map(&atom, &vac, &params(0.09, 0.05), 1.0).unwrap();
        assert!(max_abs_diff(&out, &vac) < 1e-15);
    }

    #[test]
    fn excited_atom_emits_rabi_photon() {
        let c = cut(3);
        let atom = AtomPreparation::new(1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let vac = fock_state(0, 0, c).unwrap();
        let p = params(0.3, 0.05);
        let out = apply_collision_map(&atom, &vac, &p, 2.0).unwrap();
        let a1 = c.lowering(Mode::One).to_dense();
        let n1 = trace(&(a1.adjoint() * &a1 * &*out)).re;
        assert_abs_diff_eq!(n1, (0.3f64 * 2.0).sin().powi(2), epsilon = 1e-14);

        // cross-check against the numeric oracle
        let u = propagator_numeric(&p, c, 2.0);
        let e1 = joint_index(AtomLevel::E1, 0, 0, c);
        let g1 = joint_index(AtomLevel::G, 1, 0, c);
        assert_abs_diff_eq!(u[(g1, e1)].norm_sqr(), n1, epsilon = 1e-13);
    }

    #[test]
    fn sparse_map_matches_dense_partial_trace() {
        let c = cut(2);
        let d2 = c.dim();
        let p = params(0.2, 0.13);
        let atom = AtomPreparation::with_max_coherence(0.5, 0.3, 0.2, 0.9).unwrap();
        let psi: Vec<C64> = (0..d2).map(|k| C64::new(1.0 + k as f64, 0.5 * k as f64)).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        let rho = DensityMatrix::pure(&psi);

        let rho_a = atom.density_matrix();
        let ra = CMatrix::from_fn(3, 3, |i, j| C64::new(rho_a[i][j], 0.0));
        let joint = ra.kronecker(&*rho);
        let u = propagator_numeric(&p, c, 1.3);
        let evolved = &*u * joint * u.adjoint();
        let mut want = CMatrix::zeros(d2, d2);
        for a in 0..3 {
            want += evolved.view((a * d2, a * d2), (d2, d2));
        }
        let got = apply_collision_map(&atom, &rho, &p, 1.3).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-13);
        assert_abs_diff_eq!(got.trace().re, 1.0, epsilon = 1e-12);
    }
}
