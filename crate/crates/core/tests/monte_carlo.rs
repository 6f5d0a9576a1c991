use micromaser_core::atom_field::AtomPreparation;
use micromaser_core::collision::{ensemble_average, ArrivalProcess};
use micromaser_core::evolve::{integrate, SolverConfig, TimeGrid};
use micromaser_core::hilbert::{fock_state, FockCutoff};
use micromaser_core::master_eq::{GeneratorSpec, Variant};

mod common;

fn setup(n_max: usize) -> (GeneratorSpec, TimeGrid) {
    let mut params = common::fig2_params();
    params.r = 0.5;
    params.g1 = 0.3;
    params.g2 = 0.2;
    params.kappa1 = 2e-3;
    params.kappa2 = 4e-3;
    let spec = GeneratorSpec {
        variant: Variant::ExactMap,
        params,
        atom: AtomPreparation::with_max_coherence(0.625, 0.3125, 0.0625, 0.8).unwrap(),
        cutoff: FockCutoff::new(n_max).unwrap(),
    };
    (spec, TimeGrid::new(0.0, 30.0, 7).unwrap())
}

#[test]
fn ensemble_mean_tracks_the_master_equation() {
    let (spec, grid) = setup(4);
    let rho0 = fock_state(1, 0, spec.cutoff).unwrap();
    let cfg = SolverConfig::default();
    let det = integrate(&spec, &rho0, &grid, &cfg).unwrap();
    let proc = ArrivalProcess {
        rate: spec.params.r,
        horizon: grid.t_end,
        seed: 12345,
    };
    let ens = ensemble_average(&spec.atom, &rho0, &spec.params, &proc, &grid, 500, &cfg).unwrap();
    for (i, o) in det.observables.iter().enumerate() {
        assert!((ens.mean_n1[i] - o.n1).abs() <= 3.0 * ens.se_n1[i] + 1e-12, "n1 t={}", o.t);
        assert!((ens.mean_n2[i] - o.n2).abs() <= 3.0 * ens.se_n2[i] + 1e-12, "n2 t={}", o.t);
        let tol = (3.0 * ens.se_log_neg[i]).max(1e-3);
        assert!((ens.log_neg[i] - o.log_neg).abs() <= tol, "E_N t={}", o.t);
    }
    assert!((ens.mean_arrivals - 15.0).abs() < 1.0);
}

#[test]
fn standard_error_shrinks_like_inverse_root_n() {
    let (spec, grid) = setup(3);
    let rho0 = fock_state(1, 0, spec.cutoff).unwrap();
    let cfg = SolverConfig::default();
    let run = |n, seed| {
        let proc = ArrivalProcess {
            rate: spec.params.r,
            horizon: grid.t_end,
            seed,
        };
        ensemble_average(&spec.atom, &rho0, &spec.params, &proc, &grid, n, &cfg).unwrap()
    };
    let (small, large) = (run(100, 1), run(400, 2));
    let last = grid.n_samples - 1;
    let ratio = small.se_n1[last] / large.se_n1[last];
    assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
}
