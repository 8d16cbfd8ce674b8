mod common;

use common::*;
use proptest::prelude::*;
use tlme_core::dynamics::{evolve_rk4, evolve_rk4_with, TimeGrid};
use tlme_core::linalg::{hermitian_eig, paulis};
use tlme_core::mapping::{
    build_diagonal, build_offdiagonal, compute_alpha, initial_embedding, recover_state,
};
use tlme_core::model::tilted_generator;
use tlme_core::{ComplexMatrix, MappedSystem, TlmeSpec};

fn direct_vs_recovered(spec: &TlmeSpec, ms: &MappedSystem, rho0: &ComplexMatrix, dt: f64) -> f64 {
    let grid = TimeGrid::new(0.0, 1.0, dt, usize::MAX).unwrap();
    let direct = evolve_rk4(spec, rho0, &grid).unwrap().pop().unwrap().1;
    let embedded = initial_embedding(ms, rho0).unwrap();
    let tilde = evolve_rk4(&ms.lindblad, &embedded, &grid).unwrap().pop().unwrap().1;
    let recovered = recover_state(ms, &tilde, 1.0).unwrap();
    (&direct - &recovered).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn diagonal_scheme_reproduces_tlme(seed in any::<u64>(), n in 2usize..=3) {
        let mut r = rng(seed);
        let spec = random_hp_tlme(&mut r, n);
        let ms = build_diagonal(&spec).unwrap();
        let rho0 = random_state(&mut r, n);
        prop_assert!(direct_vs_recovered(&spec, &ms, &rho0, 1e-3) <= 1e-7);
    }

    #[test]
    fn offdiagonal_scheme_reproduces_tlme(seed in any::<u64>(), n in 2usize..=3) {
        let mut r = rng(seed);
        let spec = random_generic_tlme(&mut r, n);
        let ms = build_offdiagonal(&spec).unwrap();
        let rho0 = random_state(&mut r, n);
        prop_assert!(direct_vs_recovered(&spec, &ms, &rho0, 1e-3) <= 1e-7);
    }

    #[test]
    fn mapped_generator_is_lindblad(seed in any::<u64>(), n in 2usize..=3, generic in any::<bool>()) {
        let mut r = rng(seed);
        let ms = if generic {
            build_offdiagonal(&random_generic_tlme(&mut r, n)).unwrap()
        } else {
            build_diagonal(&random_hp_tlme(&mut r, n)).unwrap()
        };
        let embedded = initial_embedding(&ms, &random_state(&mut r, n)).unwrap();
        let tr0 = embedded.trace().re;
        let grid = TimeGrid::new(0.0, 1.0, 1e-3, 100).unwrap();
        let mut worst_drift: f64 = 0.0;
        let mut worst_eig: f64 = 0.0;
        evolve_rk4_with(&ms.lindblad, &embedded, &grid, |_, rho| {
            worst_drift = worst_drift.max((rho.trace().re - tr0).abs());
            worst_eig = worst_eig.min(hermitian_eig(&rho.hermitian_part()).unwrap().min_eigenvalue());
        }).unwrap();
        prop_assert!(worst_drift <= 1e-9);
        prop_assert!(worst_eig >= -1e-8);
    }

    #[test]
    fn alpha_vanishes_for_positive_s(s in 0.0f64..5.0, seed in any::<u64>()) {
        let base = random_lindblad(&mut rng(seed), 3, 2);
        let spec = tilted_generator(&base, 0, s).unwrap();
        prop_assert_eq!(compute_alpha(&spec).unwrap().alpha(), 0.0);
    }
}

#[test]
fn rk4_discrepancy_is_fourth_order() {
    let mut r = rng(21);
    let spec = random_generic_tlme(&mut r, 2);
    let ms = build_offdiagonal(&spec).unwrap();
    let rho0 = random_state(&mut r, 2);
    let e1 = direct_vs_recovered(&spec, &ms, &rho0, 0.05);
    let e2 = direct_vs_recovered(&spec, &ms, &rho0, 0.025);
    assert!(e1 / e2 >= 8.0, "{e1} {e2}");
}

#[test]
fn negative_s_alpha_on_decay_qubit() {
    for s in [-0.3, -(2.0f64).ln(), -1.5] {
        let spec = tilted_generator(&decay_qubit(), 0, s).unwrap();
        let a = compute_alpha(&spec).unwrap();
        // λ_max(J†J) = 1 for σ₋.
        assert!((a.alpha() - ((-s).exp() - 1.0)).abs() < 1e-12);
        let ms = build_diagonal(&spec).unwrap();
        assert!(direct_vs_recovered(&spec, &ms, &paulis::p1(), 1e-3) <= 1e-7);
    }
}
