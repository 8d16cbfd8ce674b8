mod common;

use common::*;
use tlme_core::dynamics::{
    ensemble_density, evolve_rk4, jump_mc, theta_from_growth, trajectory_seed,
    weighted_observable_ensemble, JumpMc, TimeGrid,
};
use tlme_core::linalg::paulis;
use tlme_core::mapping::{build_diagonal, normalized_embedding};
use tlme_core::model::tilted_generator;
use tlme_core::{ComplexMatrix, C64};

fn excited() -> Vec<C64> {
    vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
}

#[test]
fn decay_waiting_time_is_exponential() {
    let grid = TimeGrid::new(0.0, 25.0, 1e-2, usize::MAX).unwrap();
    let n = 10_000;
    let mut total = 0.0;
    for i in 0..n {
        let rec = jump_mc(&decay_qubit(), &excited(), &grid, trajectory_seed(1, i)).unwrap();
        assert_eq!(rec.jump_events.len(), 1);
        total += rec.jump_events[0].0;
    }
    let mean = total / n as f64;
    assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
}

#[test]
fn ensemble_mean_matches_rk4() {
    let spec = driven_qubit();
    let rho0 = paulis::p1();
    let grid = TimeGrid::new(0.0, 2.0, 1e-3, 250).unwrap();
    let n = 2000;
    let mc = ensemble_density(&spec, &rho0, &grid, n, 7).unwrap();
    let exact = evolve_rk4(&spec, &rho0, &grid).unwrap();
    let worst = mc
        .iter()
        .zip(&exact)
        .map(|((_, a), (_, b))| (a - b).max_abs())
        .fold(0.0, f64::max);
    assert!(worst <= 5.0 / (n as f64).sqrt(), "{worst}");
}

#[test]
fn weighted_trace_from_trajectories() {
    let s = 0.5;
    let spec = tilted_generator(&decay_qubit(), 0, s).unwrap();
    let ms = build_diagonal(&spec).unwrap();
    let rho0 = paulis::p1();
    let t = 1.0;
    let grid = TimeGrid::new(0.0, t, 1e-3, usize::MAX).unwrap();
    let (embedded, scale) = normalized_embedding(&ms, &rho0).unwrap();
    let mc = JumpMc::new(&ms.lindblad).with_weight(ms.weight_operator()).unwrap();
    let values: Vec<C64> = (0..4000)
        .map(|i| mc.run_mixed(&embedded, &grid, trajectory_seed(3, i)).unwrap().final_weighted_trace)
        .collect();
    let est = weighted_observable_ensemble(&ms, &values, scale, t).unwrap();
    let direct = evolve_rk4(&spec, &rho0, &grid).unwrap().pop().unwrap().1.trace().re;
    assert!((est.mean.re - direct).abs() <= 3.0 * est.stderr.max(1e-12), "{} vs {direct} ± {}", est.mean.re, est.stderr);
}

#[test]
fn inefficient_mapping_variance_grows() {
    let spec = tilted_generator(&decay_qubit(), 0, -0.7).unwrap();
    let ms = build_diagonal(&spec).unwrap();
    assert!(ms.alpha() > 0.0);
    let rho0 = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
    let (embedded, scale) = normalized_embedding(&ms, &rho0).unwrap();
    let mc = JumpMc::new(&ms.lindblad).with_weight(ms.weight_operator()).unwrap();
    let variance_at = |t: f64| {
        let grid = TimeGrid::new(0.0, t, 1e-3, usize::MAX).unwrap();
        let values: Vec<C64> = (0..1000)
            .map(|i| mc.run_mixed(&embedded, &grid, trajectory_seed(5, i)).unwrap().final_weighted_trace)
            .collect();
        weighted_observable_ensemble(&ms, &values, scale, t).unwrap().variance
    };
    let (early, late) = (variance_at(0.5), variance_at(2.0));
    assert!(late > early, "{early} {late}");
}

#[test]
fn counting_rate_is_minus_theta_slope() {
    let base = driven_qubit();
    let h = 1e-4;
    let grid = TimeGrid::new(0.0, 160.0, 1e-2, 10).unwrap();
    let theta_h = theta_from_growth(&tilted_generator(&base, 0, h).unwrap(), &grid).unwrap().theta;
    let rate_from_theta = -theta_h / h;

    let burn_in = 5.0;
    let t_end = 105.0;
    let mc_grid = TimeGrid::new(0.0, t_end, 2e-3, usize::MAX).unwrap();
    let mc = JumpMc::new(&base);
    let rates: Vec<f64> = (0..200)
        .map(|i| {
            let rec = mc.run(&excited(), &mc_grid, trajectory_seed(9, i)).unwrap();
            let count = rec.jump_events.iter().filter(|(t, _)| *t > burn_in).count();
            count as f64 / (t_end - burn_in)
        })
        .collect();
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = (var / n).sqrt();
    assert!((mean - rate_from_theta).abs() <= 3.0 * sigma, "{mean} ± {sigma} vs {rate_from_theta}");
}

#[test]
fn records_are_bit_identical_per_seed() {
    let spec = driven_qubit();
    let grid = TimeGrid::new(0.0, 3.0, 1e-3, 100).unwrap();
    let a = ensemble_density(&spec, &paulis::p1(), &grid, 20, 99).unwrap();
    let b = ensemble_density(&spec, &paulis::p1(), &grid, 20, 99).unwrap();
    assert_eq!(a, b);
}
