#![allow(dead_code)]

use micromaser_core::atom_field::{AtomPreparation, InteractionParams};
use micromaser_core::hilbert::DensityMatrix;
use micromaser_core::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fig2_params() -> InteractionParams {
    InteractionParams {
        g1: 0.09,
        g2: 0.05,
        r: 0.1,
        tau: 1.0,
        kappa1: 1e-6,
        kappa2: 2e-6,
        omega0: 1e10,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `GG†/Tr` with Gaussian-ish entries; full rank almost surely.
pub fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    DensityMatrix::new(rho / tr).unwrap()
}

pub fn random_atom(rng: &mut ChaCha8Rng) -> AtomPreparation {
    let w: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let s: f64 = w.iter().sum();
    let (pe1, pe2) = (w[0] / s, w[1] / s);
    let pg = 1.0 - pe1 - pe2;
    let chi = rng.random_range(-1.0..=1.0) * (pe1 * pe2).sqrt();
    AtomPreparation::new(pe1, pe2, pg, chi, rng.random()).unwrap()
}
