//! Truncated two-mode Fock space.
//!
//! Basis ordering is mode-1-major: `|m, n⟩` lives at index `m·d + n` with
//! `d = n_max + 1`. Every module and every file format relies on this.

use core::ops::Deref;

use crate::linalg::{self, ShiftOp};
use crate::{CMatrix, Error, Invariant, Result, C64};

/// Maximum photon number kept per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockCutoff {
    n_max: usize,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidCutoff);
        }
        Ok(FockCutoff { n_max })
    }

    pub fn n_max(self) -> usize {
        self.n_max
    }

    /// Dimension of one mode, `n_max + 1`.
    pub fn local_dim(self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the two-mode field, `d²`.
    pub fn dim(self) -> usize {
        self.local_dim() * self.local_dim()
    }

    pub fn index(self, m: usize, n: usize) -> usize {
        m * self.local_dim() + n
    }

    pub fn occupations(self, k: usize) -> (usize, usize) {
        (k / self.local_dim(), k % self.local_dim())
    }

    /// Recovers the cutoff from a two-mode field dimension `d²`.
    pub fn from_field_dim(dim: usize) -> Result<Self> {
        let d = libm::round(libm::sqrt(dim as f64)) as usize;
        if d < 2 || d * d != dim {
            return Err(Error::DimensionMismatch {
                expected: d.max(2) * d.max(2),
                found: dim,
            });
        }
        FockCutoff::new(d - 1)
    }

    /// Two-mode lowering operator for `mode` in sparse form.
    pub fn lowering(self, mode: Mode) -> ShiftOp {
        ShiftOp::from_fn(self.dim(), |k| {
            let (m, n) = self.occupations(k);
            match mode {
                Mode::One if m > 0 => Some((self.index(m - 1, n), C64::new(libm::sqrt(m as f64), 0.0))),
                Mode::Two if n > 0 => Some((self.index(m, n - 1), C64::new(libm::sqrt(n as f64), 0.0))),
                _ => None,
            }
        })
    }

    /// Two-mode raising operator for `mode` in sparse form.
    pub fn raising(self, mode: Mode) -> ShiftOp {
        self.lowering(mode).adjoint().expect("ladder operators are injective")
    }
}

/// One of the two cavity polarization modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
}

fn check_square_finite(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Square matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(CMatrix);

impl OperatorMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square_finite(&m)?;
        Ok(OperatorMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

impl Deref for OperatorMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// Field density matrix.
///
/// Construction only checks shape and finiteness; physical validity is a
/// matter of tolerance and is reported by [`validate_state`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square_finite(&m)?;
        Ok(DensityMatrix(m))
    }

    /// Pure state `|ψ⟩⟨ψ|` of a normalized amplitude vector.
    pub fn pure(psi: &[C64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi);
        DensityMatrix(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.0)
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ ρ_ij ρ_ji
        let dim = self.dim();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                s += self.0[(i, j)] * self.0[(j, i)];
            }
        }
        s.re
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

impl Deref for DensityMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// The A|B split of a bipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bipartition {
    pub mode_a_dim: usize,
    pub mode_b_dim: usize,
}

impl Bipartition {
    pub fn new(mode_a_dim: usize, mode_b_dim: usize) -> Self {
        Bipartition {
            mode_a_dim,
            mode_b_dim,
        }
    }

    /// Mode 1 | mode 2 split of the two-mode field.
    pub fn modes(cutoff: FockCutoff) -> Self {
        Bipartition::new(cutoff.local_dim(), cutoff.local_dim())
    }

    pub fn dim(self) -> usize {
        self.mode_a_dim * self.mode_b_dim
    }

    /// The same split with the roles of A and B exchanged.
    pub fn swapped(self) -> Self {
        Bipartition::new(self.mode_b_dim, self.mode_a_dim)
    }
}

/// Single-mode lowering operator: entry `(m−1, m) = √m`.
pub fn annihilation_op(cutoff: FockCutoff) -> OperatorMatrix {
    let d = cutoff.local_dim();
    OperatorMatrix(CMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            C64::new(libm::sqrt(j as f64), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// Embeds a single-mode operator as `op ⊗ I` (mode 1) or `I ⊗ op` (mode 2).
pub fn two_mode_operator(op: &OperatorMatrix, mode: Mode, cutoff: FockCutoff) -> Result<OperatorMatrix> {
    let d = cutoff.local_dim();
    if op.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.dim(),
        });
    }
    let id = CMatrix::identity(d, d);
    Ok(OperatorMatrix(match mode {
        Mode::One => linalg::kron(op, &id),
        Mode::Two => linalg::kron(&id, op),
    }))
}

/// `|m, n⟩⟨m, n|`.
pub fn fock_state(m: usize, n: usize, cutoff: FockCutoff) -> Result<DensityMatrix> {
    if m > cutoff.n_max() || n > cutoff.n_max() {
        return Err(Error::OccupationOutOfRange {
            m,
            n,
            n_max: cutoff.n_max(),
        });
    }
    let mut rho = CMatrix::zeros(cutoff.dim(), cutoff.dim());
    let k = cutoff.index(m, n);
    rho[(k, k)] = C64::new(1.0, 0.0);
    Ok(DensityMatrix(rho))
}

/// Tolerances separating integrator drift from genuine bugs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub trace: f64,
    pub hermiticity: f64,
    pub positivity: f64,
    /// Boundary population above which a run is flagged non-converged.
    pub leakage: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            trace: 1e-9,
            hermiticity: 1e-9,
            positivity: 1e-8,
            leakage: 1e-6,
        }
    }
}

/// Validity diagnostics of a field state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    /// `|Tr ρ − 1|`.
    pub trace_err: f64,
    /// `max |ρ − ρ†|`.
    pub herm_err: f64,
    pub min_eig: f64,
    /// Population in basis states with `n_max` photons in either mode.
    pub leakage: f64,
}

impl StateDiagnostics {
    /// First violated invariant, if any. Leakage is not a violation; see
    /// [`StateDiagnostics::leaks`].
    pub fn violation(&self, tol: &Tolerances) -> Option<(Invariant, f64, f64)> {
        if !(self.trace_err <= tol.trace) {
            return Some((Invariant::Trace, self.trace_err, tol.trace));
        }
        if !(self.herm_err <= tol.hermiticity) {
            return Some((Invariant::Hermiticity, self.herm_err, tol.hermiticity));
        }
        if !(self.min_eig >= -tol.positivity) {
            return Some((Invariant::Positivity, self.min_eig, tol.positivity));
        }
        None
    }

    pub fn leaks(&self, tol: &Tolerances) -> bool {
        self.leakage > tol.leakage
    }
}

/// Population at the truncation boundary.
pub fn leakage(rho: &CMatrix, cutoff: FockCutoff) -> f64 {
    let top = cutoff.n_max();
    (0..cutoff.dim())
        .filter(|&k| {
            let (m, n) = cutoff.occupations(k);
            m == top || n == top
        })
        .map(|k| rho[(k, k)].re)
        .sum()
}

/// Computes the diagnostics record of `rho`; never mutates it.
pub fn validate_state(rho: &DensityMatrix, cutoff: FockCutoff) -> Result<StateDiagnostics> {
    if rho.dim() != cutoff.dim() {
        return Err(Error::DimensionMismatch {
            expected: cutoff.dim(),
            found: rho.dim(),
        });
    }
    let eig = linalg::hermitian_eigenvalues(rho);
    Ok(StateDiagnostics {
        trace_err: (rho.trace() - 1.0).norm(),
        herm_err: linalg::hermiticity_error(rho),
        min_eig: eig.first().copied().unwrap_or(0.0),
        leakage: leakage(rho, cutoff),
    })
}
