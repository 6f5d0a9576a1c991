//! Observables of the two-mode field.

use crate::hilbert::{self, Bipartition, DensityMatrix, FockCutoff};
use crate::linalg::{self, hermitian_eigenvalues, hermiticity_error};
use crate::{CMatrix, Error, Result, C64};

/// Values below this are reported as exactly zero entanglement.
pub const LOG_NEG_FLOOR: f64 = 1e-12;

/// Largest anti-Hermitian part tolerated by [`log_negativity`].
pub const HERMITICITY_TOL: f64 = 1e-9;

/// Everything recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub log_neg: f64,
    pub n1: f64,
    pub n2: f64,
    pub purity: f64,
    /// `⟨a₁†a₂⟩`.
    pub cross_coherence: C64,
    pub trace_err: f64,
    /// `NaN` at samples where the spectrum of ρ was not computed.
    pub min_eig: f64,
    pub leakage: f64,
}

/// Transposes the A factor: `((a, b), (a′, b′)) ↦ ((a′, b), (a, b′))` with
/// index `a·d_B + b`.
pub fn partial_transpose(rho: &CMatrix, split: Bipartition) -> Result<CMatrix> {
    let dim = split.dim();
    for found in [rho.nrows(), rho.ncols()] {
        if found != dim {
            return Err(Error::DimensionMismatch { expected: dim, found });
        }
    }
    let db = split.mode_b_dim;
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let (a2, b) = (i / db, i % db);
        let (a, b2) = (j / db, j % db);
        rho[(a * db + b, a2 * db + b2)]
    }))
}

/// Trace norm of a Hermitian matrix, `Σ |λ|`.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

fn log_neg_unchecked(rho: &CMatrix, split: Bipartition) -> Result<f64> {
    let pt = partial_transpose(rho, split)?;
    let eig = hermitian_eigenvalues(&pt);
    let total: f64 = eig.iter().sum();
    let norm: f64 = eig.iter().map(|l| l.abs()).sum();
    // ‖ρ^T_A‖ of the unit-trace state ρ / Tr ρ
    let value = libm::log2(norm / total);
    Ok(if value < LOG_NEG_FLOOR { 0.0 } else { value })
}

/// `E_N = log₂ ‖ρ^{T_A}‖₁`, with results below [`LOG_NEG_FLOOR`] clamped to 0.
pub fn log_negativity(rho: &DensityMatrix, split: Bipartition) -> Result<f64> {
    let herm = hermiticity_error(rho);
    if herm > HERMITICITY_TOL {
        return Err(Error::NotHermitian(herm));
    }
    log_neg_unchecked(rho, split)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeObservables {
    pub n1: f64,
    pub n2: f64,
    pub purity: f64,
    pub cross_coherence: C64,
}

/// Photon numbers, purity and `⟨a₁†a₂⟩`.
pub fn mode_observables(rho: &DensityMatrix, cutoff: FockCutoff) -> ModeObservables {
    let (mut n1, mut n2) = (0.0, 0.0);
    let mut cross = C64::new(0.0, 0.0);
    for k in 0..cutoff.dim() {
        let (m, n) = cutoff.occupations(k);
        let p = rho[(k, k)].re;
        n1 += m as f64 * p;
        n2 += n as f64 * p;
        // a₁†a₂|m,n⟩ = √((m+1)n)|m+1,n−1⟩, so Tr(a₁†a₂ρ) = Σ √((m+1)n) ρ[(m,n),(m+1,n−1)]
        if n > 0 && m < cutoff.n_max() {
            let c = libm::sqrt(((m + 1) * n) as f64);
            cross += rho[(k, cutoff.index(m + 1, n - 1))] * c;
        }
    }
    ModeObservables {
        n1,
        n2,
        purity: rho.purity(),
        cross_coherence: cross,
    }
}

/// Full observable record. The spectrum of ρ itself (for `min_eig`) is only
/// computed when `with_spectrum` is set.
pub fn observe(t: f64, rho: &DensityMatrix, cutoff: FockCutoff, with_spectrum: bool) -> Result<ObservableRecord> {
    let modes = mode_observables(rho, cutoff);
    let min_eig = if with_spectrum {
        hermitian_eigenvalues(rho).first().copied().unwrap_or(0.0)
    } else {
        f64::NAN
    };
    Ok(ObservableRecord {
        t,
        log_neg: log_negativity(rho, Bipartition::modes(cutoff))?,
        n1: modes.n1,
        n2: modes.n2,
        purity: modes.purity,
        cross_coherence: modes.cross_coherence,
        trace_err: (linalg::trace(rho) - 1.0).norm(),
        min_eig,
        leakage: hilbert::leakage(rho, cutoff),
    })
}
