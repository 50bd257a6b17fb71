use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use faer::Mat;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superabsorb::geometry::{RingSpec, SiteParams, TrapSpec};
use superabsorb::hamiltonian::Convention;
use superabsorb::heatengine::{EngineConfig, Model, PhononSpec, ReinitScheme};
use superabsorb::liouvillian::{steady_state, steady_state_with, SolverOptions, Strategy};
use superabsorb::superop::{unvectorize, vectorize};

fn config(n: usize, theta_zen: f64, phonons: PhononSpec) -> EngineConfig {
    EngineConfig {
        ring: RingSpec::regular(n, &SiteParams { theta_zen, ..SiteParams::default() }).unwrap().with_trap(TrapSpec::incoherent(1e-2)),
        optical_temperature: 5800.0,
        suppression: 0.99,
        phonons,
        vib_temperature: 300.0,
        reinit: ReinitScheme::Ladder,
        gamma_r: 1e-2,
        convention: None,
        solver: SolverOptions::default(),
    }
}

const FAST: PhononSpec = PhononSpec::Ohmic { multiplier: 1e3 };

/// Random density matrix A A† / Tr(A A†).
fn random_state(d: usize, seed: u64) -> Mat<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let r = &a * a.adjoint();
    let tr: f64 = (0..d).map(|i| r[(i, i)].re).sum();
    Mat::from_fn(d, d, |i, k| r[(i, k)] / tr)
}

fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            m = m.max((a[(i, k)] - b[(i, k)]).norm());
        }
    }
    m
}

#[test]
fn guide_slide_kernel_is_one_dimensional() {
    for n in 2..=4 {
        let model = Model::build(&config(n, FRAC_PI_4, FAST)).unwrap();
        for gt in [1e-9, 1e-6, 1e-3] {
            let ss = model.steady_state(gt).unwrap();
            assert_eq!(ss.diagnostics.kernel_dim, 1, "n={n} γt={gt}");
            assert!(ss.diagnostics.passes());
        }
    }
}

#[test]
fn unique_steady_state_ignores_initial_state() {
    let model = Model::build(&config(3, FRAC_PI_4, FAST)).unwrap();
    let l = model.liouvillian(1e-6);
    let base = steady_state(&l, None).unwrap();
    for seed in 0..3 {
        let rho0 = random_state(l.dim, seed);
        let other = steady_state(&l, Some(&rho0)).unwrap();
        assert!(max_diff(&base.rho, &other.rho) < 1e-9);
    }
    let inverse = steady_state_with(&l, None, &SolverOptions { strategy: Strategy::InversePower, ..SolverOptions::default() }).unwrap();
    assert!(max_diff(&base.rho, &inverse.rho) < 1e-8);
}

#[test]
fn degenerate_parallel_kernel_keeps_initial_weight() {
    // no phonons: the parallel ring has disconnected population classes
    let c = EngineConfig { convention: Some(Convention::Parallel), ..config(3, FRAC_PI_2, PhononSpec::None) };
    let model = Model::build(&c).unwrap();
    let ss = model.steady_state(1e-6).unwrap();
    assert!(ss.diagnostics.kernel_dim > 1);
    assert!(ss.diagnostics.passes());
}

#[test]
fn pentamer_with_trap_assembly_is_sparse() {
    let model = Model::build(&config(5, FRAC_PI_4, FAST)).unwrap();
    let l = model.liouvillian(1e-6);
    assert_eq!(l.dim, 64);
    assert_eq!(l.matrix.n, 4096);
    let density = l.density();
    assert!(density < 0.065, "density {density}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_conserves_trace(n in 2usize..=3, log_gt in -10.0f64..-1.0, seed in 0u64..1000, gs in any::<bool>()) {
        let tz = if gs { FRAC_PI_4 } else { FRAC_PI_2 };
        let model = Model::build(&config(n, tz, FAST)).unwrap();
        let l = model.liouvillian(10f64.powf(log_gt));
        prop_assert!(l.trace_leak() < 1e-12 * l.matrix.max_abs().max(1.0));
        let rho = random_state(l.dim, seed);
        let drho = unvectorize(&l.matrix.mul_vec(&vectorize(&rho)), l.dim);
        let tr: C64 = (0..l.dim).map(|i| drho[(i, i)]).sum();
        prop_assert!(tr.norm() < 1e-12 * l.matrix.max_abs());
    }
}
