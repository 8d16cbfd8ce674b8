//! Thermodynamics of trajectories: the micromaser, unitary ancilla
//! couplings for the s-ensemble and θ(s) sweeps.

// Provides float methods when std is absent from the build graph.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;


use crate::dynamics::{
    self, log_growth_rate, GrowthOptions, GrowthSystem, TimeGrid,
};
use crate::error::{Error, Result};
use crate::linalg::{kron, paulis, ComplexMatrix, C64};
use crate::mapping::{self, MappedSystem, Scheme};
use crate::model::{tilted_generator, DensityMatrix, LindbladSpec};

/// Single-mode micromaser in a Fock space truncated to `fock_dim` levels.
///
/// The top level is a hard wall: the raising jumps `J₁` and `J₄`
/// annihilate it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicromaserSpec {
    pub fock_dim: usize,
    pub pump_rate: f64,
    pub rabi_angle: f64,
    pub thermal_occupancy: f64,
}

impl MicromaserSpec {
    /// Reduced parameters that keep a full sweep at desk scale.
    pub fn desk() -> Self {
        Self {
            fock_dim: 30,
            pump_rate: 50.0,
            rabi_angle: 4.0 * core::f64::consts::PI,
            thermal_occupancy: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fock_dim < 2 {
            return Err(Error::TruncationTooSmall {
                fock_dim: self.fock_dim,
            });
        }
        if !(self.pump_rate > 0.0 && self.pump_rate.is_finite()) {
            return Err(Error::InvalidParameter("pump rate must be positive"));
        }
        if !self.rabi_angle.is_finite() {
            return Err(Error::InvalidParameter("Rabi angle must be finite"));
        }
        if !(self.thermal_occupancy >= 0.0 && self.thermal_occupancy.is_finite()) {
            return Err(Error::InvalidParameter("thermal occupancy must be non-negative"));
        }
        Ok(())
    }

    /// `r sin²(ϑ√(n+1))`: rate of the counted emission from level `n`.
    fn pump_up(&self, n: usize) -> f64 {
        if n + 1 >= self.fock_dim {
            return 0.0;
        }
        let s = (self.rabi_angle * ((n + 1) as f64).sqrt()).sin();
        self.pump_rate * s * s
    }

    /// `ν(n+1)`: thermal absorption from level `n`.
    fn thermal_up(&self, n: usize) -> f64 {
        if n + 1 >= self.fock_dim {
            return 0.0;
        }
        self.thermal_occupancy * (n + 1) as f64
    }

    /// `(ν+1)n`: emission into the bath from level `n`.
    fn thermal_down(&self, n: usize) -> f64 {
        (self.thermal_occupancy + 1.0) * n as f64
    }

    /// Stationary photon-number distribution of the untilted dynamics.
    ///
    /// The population dynamics is a birth–death chain, so detailed balance
    /// gives it in closed form; it is accumulated in the log domain.
    pub fn stationary_populations(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.fock_dim;
        let mut log_p = vec![0.0; n];
        let mut cut = n;
        for k in 0..n - 1 {
            let up = self.pump_up(k) + self.thermal_up(k);
            let down = self.thermal_down(k + 1);
            if up == 0.0 {
                cut = k + 1;
                break;
            }
            log_p[k + 1] = log_p[k] + (up / down).ln();
        }
        let max = log_p[..cut].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = (0..n)
            .map(|k| if k < cut { (log_p[k] - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        Ok(p)
    }

    pub fn stationary_mean_photons(&self) -> Result<f64> {
        Ok(self
            .stationary_populations()?
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum())
    }

    /// `⟨n⟩ < fock_dim/2`; otherwise the truncation may distort results.
    pub fn truncation_adequate(&self) -> Result<bool> {
        Ok(self.stationary_mean_photons()? < self.fock_dim as f64 / 2.0)
    }
}

/// The four-channel micromaser Lindbladian with `H = 0`.
///
/// Jump order: `J₁` (atom exits in the lower state, counted), `J₂` (atom
/// exits unchanged), `J₃` (loss to the bath), `J₄` (gain from the bath).
pub fn build_micromaser(spec: &MicromaserSpec) -> Result<LindbladSpec> {
    spec.validate()?;
    let n = spec.fock_dim;
    let mut j1 = ComplexMatrix::zeros(n, n);
    let mut j2 = ComplexMatrix::zeros(n, n);
    let mut j3 = ComplexMatrix::zeros(n, n);
    let mut j4 = ComplexMatrix::zeros(n, n);
    let root_r = spec.pump_rate.sqrt();
    for k in 0..n {
        let angle = spec.rabi_angle * ((k + 1) as f64).sqrt();
        if k + 1 < n {
            j1[(k + 1, k)] = C64::new(root_r * angle.sin(), 0.0);
            j4[(k + 1, k)] = C64::new(spec.thermal_up(k).sqrt(), 0.0);
        }
        j2[(k, k)] = C64::new(root_r * angle.cos(), 0.0);
        if k > 0 {
            j3[(k - 1, k)] = C64::new(spec.thermal_down(k).sqrt(), 0.0);
        }
    }
    LindbladSpec::new(ComplexMatrix::zeros(n, n), vec![j1, j2, j3, j4])
}

/// Unitary-coupled off-diagonal embedding of the tilted generator of
/// `base` counting channel `channel`.
///
/// The counted jump is split into `J/√2 ⊗ U_±` with
/// `U_± = e^{iφ±}p₀ + p₁`, `φ± = ±acos(e^{-s})`; every other channel acts
/// as `J⊗1`. The weight is `|1⟩⟨0|` and `α = 0`.
pub fn build_unitary_coupling(base: &LindbladSpec, channel: usize, s: f64) -> Result<MappedSystem> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeS { s });
    }
    let lsys = base.without_jump(channel)?;
    let j = &base.jumps()[channel];
    let one = ComplexMatrix::identity(2);
    let mut jumps: Vec<ComplexMatrix> = lsys.jumps().iter().map(|op| kron(op, &one)).collect();
    let scaled = j.scale_real(core::f64::consts::FRAC_1_SQRT_2);
    for u in unitary_pair(s) {
        jumps.push(kron(&scaled, &u));
    }
    let lindblad = LindbladSpec::new(kron(lsys.hamiltonian(), &one), jumps)?;
    MappedSystem::from_parts(Scheme::OffDiagonalAncilla, lindblad, 0.0, 0.0)
}

/// `[U₊, U₋]` with `½(U₊†wU₊ + U₋†wU₋) = e^{-s} w` for `w = |1⟩⟨0|`.
pub fn unitary_pair(s: f64) -> [ComplexMatrix; 2] {
    let phi = (-s).exp().min(1.0).acos();
    let u = |p: f64| {
        let mut m = paulis::p1();
        m[(0, 0)] = C64::from_polar(1.0, p);
        m
    };
    [u(phi), u(-phi)]
}

/// s-biased micromaser via the unitary ancilla coupling on `J₁`.
pub fn build_sbias_coupling(spec: &MicromaserSpec, s: f64) -> Result<MappedSystem> {
    build_unitary_coupling(&build_micromaser(spec)?, 0, s)
}

/// Tilted population dynamics of the micromaser: a tridiagonal generator
/// on the photon-number distribution.
#[derive(Clone, Debug)]
pub struct PopulationGrowth {
    gain: Vec<f64>,
    loss: Vec<f64>,
    diag: Vec<f64>,
    p: Vec<f64>,
    scratch: [Vec<f64>; 5],
}

impl PopulationGrowth {
    pub fn new(spec: &MicromaserSpec, s: f64) -> Result<Self> {
        spec.validate()?;
        let n = spec.fock_dim;
        let tilt = (-s).exp();
        // gain[k]: k → k+1, loss[k]: k+1 → k.
        let gain: Vec<f64> = (0..n - 1)
            .map(|k| tilt * spec.pump_up(k) + spec.thermal_up(k))
            .collect();
        let loss: Vec<f64> = (0..n - 1).map(|k| spec.thermal_down(k + 1)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|k| -(spec.pump_up(k) + spec.thermal_up(k) + spec.thermal_down(k)))
            .collect();
        Ok(Self {
            gain,
            loss,
            diag,
            p: vec![1.0 / n as f64; n],
            scratch: core::array::from_fn(|_| vec![0.0; n]),
        })
    }

    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let n = p.len();
        for k in 0..n {
            let mut v = self.diag[k] * p[k];
            if k > 0 {
                v += self.gain[k - 1] * p[k - 1];
            }
            if k + 1 < n {
                v += self.loss[k] * p[k + 1];
            }
            out[k] = v;
        }
    }
}

impl GrowthSystem for PopulationGrowth {
    fn step(&mut self, dt: f64) {
        let mut scratch = core::mem::take(&mut self.scratch);
        let [k1, k2, k3, k4, tmp] = &mut scratch;
        let n = self.p.len();
        self.apply(&self.p, k1);
        for i in 0..n {
            tmp[i] = self.p[i] + 0.5 * dt * k1[i];
        }
        self.apply(tmp, k2);
        for i in 0..n {
            tmp[i] = self.p[i] + 0.5 * dt * k2[i];
        }
        self.apply(tmp, k3);
        for i in 0..n {
            tmp[i] = self.p[i] + dt * k3[i];
        }
        self.apply(tmp, k4);
        for i in 0..n {
            self.p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.scratch = scratch;
    }

    fn renormalize(&mut self) -> Result<f64> {
        let tr: f64 = self.p.iter().sum();
        if !tr.is_finite() {
            return Err(Error::NonFinite);
        }
        if tr <= 0.0 {
            return Err(Error::InvalidParameter("population trace lost positivity"));
        }
        self.p.iter_mut().for_each(|x| *x /= tr);
        Ok(tr)
    }
}

/// Estimator used for each point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaMethod {
    /// Renormalized growth of the tilted TLME on full density matrices.
    Growth,
    /// Renormalized growth restricted to photon-number populations
    /// (micromaser only; exact because the dynamics preserves diagonality).
    PopulationGrowth,
    /// Deterministic decay of the ancilla coherence of the unitary-coupled
    /// embedding.
    Coherence,
    /// Coherence decay averaged over quantum-jump trajectories.
    CoherenceMc { n_traj: usize, base_seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub s: f64,
    pub theta: f64,
    /// Slope drift for growth methods, batch-means standard error for MC,
    /// zero for deterministic coherence.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// `θ` non-increasing in `s` (up to the reported point errors).
    pub monotone: bool,
    /// Second differences above `-10h²`; `None` for non-uniform grids.
    pub convex: Option<bool>,
    /// Stationary `⟨n⟩` when it violates `⟨n⟩ < fock_dim/2`.
    pub truncation_warning: Option<f64>,
}

/// θ at one `s` for the tilted generator of `base` counting `channel`.
pub fn theta_point(
    base: &LindbladSpec,
    channel: usize,
    s: f64,
    method: ThetaMethod,
    grid: &TimeGrid,
    options: &GrowthOptions,
) -> Result<SweepPoint> {
    let n = base.dim();
    let rho0 = ComplexMatrix::identity(n).scale_real(1.0 / n as f64);
    let (theta, error) = match method {
        ThetaMethod::Growth => {
            let spec = tilted_generator(base, channel, s)?;
            let est = dynamics::theta_from_growth_with(&spec, &rho0, grid, options)?;
            (est.theta, (est.last_slope - est.previous_slope).abs())
        }
        ThetaMethod::PopulationGrowth => {
            return Err(Error::InvalidParameter(
                "population growth needs micromaser parameters",
            ))
        }
        ThetaMethod::Coherence => {
            let ms = build_unitary_coupling(base, channel, s)?;
            (dynamics::theta_from_coherence(&ms, &rho0, grid)?.theta, 0.0)
        }
        ThetaMethod::CoherenceMc { n_traj, base_seed } => {
            let ms = build_unitary_coupling(base, channel, s)?;
            let (times, series, scale) =
                dynamics::coherence_series(&ms, &rho0, grid, n_traj, base_seed)?;
            let fit = dynamics::theta_from_coherence_ensemble(&times, &series, scale)?;
            (fit.theta, fit.stderr)
        }
    };
    Ok(SweepPoint { s, theta, error })
}

/// θ at one `s` for the micromaser, honouring the population fast path.
pub fn micromaser_theta_point(
    spec: &MicromaserSpec,
    s: f64,
    method: ThetaMethod,
    grid: &TimeGrid,
    options: &GrowthOptions,
) -> Result<SweepPoint> {
    match method {
        ThetaMethod::PopulationGrowth => {
            let mut sys = PopulationGrowth::new(spec, s)?;
            let est = log_growth_rate(&mut sys, grid, options)?;
            Ok(SweepPoint {
                s,
                theta: est.theta,
                error: (est.last_slope - est.previous_slope).abs(),
            })
        }
        _ => theta_point(&build_micromaser(spec)?, 0, s, method, grid, options),
    }
}

fn check_s_values(s_values: &[f64], method: ThetaMethod) -> Result<()> {
    if s_values.is_empty() {
        return Err(Error::InvalidParameter("empty s grid"));
    }
    let needs_positive = matches!(
        method,
        ThetaMethod::Coherence | ThetaMethod::CoherenceMc { .. }
    );
    if needs_positive {
        if let Some(&s) = s_values.iter().find(|&&s| !(s >= 0.0)) {
            return Err(Error::NegativeS { s });
        }
    }
    Ok(())
}

/// Sequential sweep over `s_values` for a generic Lindbladian.
pub fn theta_sweep_lindblad(
    base: &LindbladSpec,
    channel: usize,
    s_values: &[f64],
    method: ThetaMethod,
    grid: &TimeGrid,
    options: &GrowthOptions,
) -> Result<SweepResult> {
    check_s_values(s_values, method)?;
    let points = s_values
        .iter()
        .map(|&s| theta_point(base, channel, s, method, grid, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_sweep(points, None))
}

/// Sequential micromaser sweep; the truncation guard is reported, not
/// enforced.
pub fn theta_sweep(
    spec: &MicromaserSpec,
    s_values: &[f64],
    method: ThetaMethod,
    grid: &TimeGrid,
    options: &GrowthOptions,
) -> Result<SweepResult> {
    check_s_values(s_values, method)?;
    let points = s_values
        .iter()
        .map(|&s| micromaser_theta_point(spec, s, method, grid, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_sweep(points, truncation_warning(spec)?))
}

/// Stationary `⟨n⟩` if it violates the truncation guard.
pub fn truncation_warning(spec: &MicromaserSpec) -> Result<Option<f64>> {
    let mean = spec.stationary_mean_photons()?;
    Ok((mean >= spec.fock_dim as f64 / 2.0).then_some(mean))
}

/// Attaches monotonicity and convexity diagnostics to sweep points in `s`
/// order as given.
pub fn summarize_sweep(points: Vec<SweepPoint>, truncation_warning: Option<f64>) -> SweepResult {
    let monotone = points.windows(2).all(|w| {
        let slack = 1e-9 + w[0].error + w[1].error;
        w[1].s < w[0].s || w[1].theta <= w[0].theta + slack
    });
    let convex = uniform_spacing(&points).map(|h| {
        points
            .windows(3)
            .all(|w| w[0].theta - 2.0 * w[1].theta + w[2].theta >= -10.0 * h * h)
    });
    SweepResult {
        points,
        monotone,
        convex,
        truncation_warning,
    }
}

fn uniform_spacing(points: &[SweepPoint]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let h = points[1].s - points[0].s;
    let uniform = points
        .windows(2)
        .all(|w| ((w[1].s - w[0].s) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    (uniform && h > 0.0).then_some(h)
}

/// First `s` where `-dθ/ds` falls below half its value at the start of the
/// sweep; a simple locator for the steep drop of the mean count.
pub fn steep_drop_location(points: &[SweepPoint]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let rate = |i: usize| -(points[i + 1].theta - points[i].theta) / (points[i + 1].s - points[i].s);
    let initial = rate(0);
    (1..points.len() - 1)
        .find(|&i| rate(i) < 0.5 * initial)
        .map(|i| 0.5 * (points[i].s + points[i + 1].s))
}

/// Initial composite state used by coherence methods, exposed for callers
/// that drive the unravelling themselves.
pub fn maximally_mixed_embedding(ms: &MappedSystem) -> Result<(DensityMatrix, f64)> {
    let n = ms.system_dim();
    mapping::normalized_embedding(ms, &ComplexMatrix::identity(n).scale_real(1.0 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{build_diagonal, verify_weight_algebra};
    use core::f64::consts::PI;

    fn driven_qubit() -> LindbladSpec {
        LindbladSpec::new(paulis::sigma_x(), vec![paulis::sigma_minus()]).unwrap()
    }

    #[test]
    fn pinned_angle() {
        let spec = MicromaserSpec {
            fock_dim: 4,
            pump_rate: 9.0,
            rabi_angle: PI / 2.0,
            thermal_occupancy: 0.5,
        };
        let l = build_micromaser(&spec).unwrap();
        let (j1, j2) = (&l.jumps()[0], &l.jumps()[1]);
        assert!((j1[(1, 0)].re - 3.0).abs() < 1e-15);
        assert!(j2[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn completeness_below_truncation() {
        let spec = MicromaserSpec::desk();
        let l = build_micromaser(&spec).unwrap();
        let (j1, j2) = (&l.jumps()[0], &l.jumps()[1]);
        let sum = &j1.adjoint().matmul(j1) + &j2.adjoint().matmul(j2);
        for n in 0..spec.fock_dim - 1 {
            assert!((sum[(n, n)].re - spec.pump_rate).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_temperature_has_no_gain() {
        let spec = MicromaserSpec {
            thermal_occupancy: 0.0,
            ..MicromaserSpec::desk()
        };
        assert_eq!(build_micromaser(&spec).unwrap().jumps()[3].max_abs(), 0.0);
    }

    #[test]
    fn truncation_too_small() {
        let spec = MicromaserSpec {
            fock_dim: 1,
            ..MicromaserSpec::desk()
        };
        assert_eq!(
            build_micromaser(&spec).unwrap_err(),
            Error::TruncationTooSmall { fock_dim: 1 }
        );
    }

    #[test]
    fn negative_s_rejected() {
        assert_eq!(
            build_sbias_coupling(&MicromaserSpec::desk(), -0.1).unwrap_err(),
            Error::NegativeS { s: -0.1 }
        );
    }

    #[test]
    fn unitary_pair_algebra() {
        for s in [0.0, 0.01, 0.7, 3.0] {
            let [up, um] = unitary_pair(s);
            let report =
                verify_weight_algebra(&paulis::sigma_plus(), &[], &[vec![up], vec![um]]).unwrap();
            assert!(report.pass);
            let avg = (report.constant(mapping::Relation::Middle { i: 0, j: 0, k: 0 }).unwrap()
                + report.constant(mapping::Relation::Middle { i: 0, j: 0, k: 1 }).unwrap())
                * 0.5;
            assert!((avg - C64::new((-s).exp(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn s_zero_decouples() {
        let ms = build_sbias_coupling(&MicromaserSpec { fock_dim: 6, ..MicromaserSpec::desk() }, 0.0).unwrap();
        let [up, um] = unitary_pair(0.0);
        assert!((&up - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        assert!((&um - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        assert_eq!(ms.alpha(), 0.0);
    }

    #[test]
    fn stationary_distribution_is_steady() {
        let spec = MicromaserSpec::desk();
        let p = spec.stationary_populations().unwrap();
        let sys = PopulationGrowth::new(&spec, 0.0).unwrap();
        let mut out = vec![0.0; p.len()];
        sys.apply(&p, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-10));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn population_matches_dense_growth() {
        let spec = MicromaserSpec {
            fock_dim: 8,
            pump_rate: 3.0,
            rabi_angle: 1.3,
            thermal_occupancy: 0.4,
        };
        let grid = TimeGrid::new(0.0, 60.0, 1e-3, 1000).unwrap();
        let opts = GrowthOptions::default();
        let a = micromaser_theta_point(&spec, 0.3, ThetaMethod::PopulationGrowth, &grid, &opts).unwrap();
        let b = micromaser_theta_point(&spec, 0.3, ThetaMethod::Growth, &grid, &opts).unwrap();
        assert!((a.theta - b.theta).abs() < 1e-9, "{} vs {}", a.theta, b.theta);
    }

    #[test]
    fn unitary_and_diagonal_routes_agree() {
        let base = driven_qubit();
        let s = 0.4;
        let grid = TimeGrid::new(0.0, 60.0, 1e-2, 10).unwrap();
        let rho0 = ComplexMatrix::identity(2).scale_real(0.5);
        let unitary = dynamics::theta_from_coherence(&build_unitary_coupling(&base, 0, s).unwrap(), &rho0, &grid).unwrap();
        let diag_ms = build_diagonal(&tilted_generator(&base, 0, s).unwrap()).unwrap();
        let diagonal = dynamics::theta_from_coherence(&diag_ms, &rho0, &grid).unwrap();
        assert!((unitary.theta - diagonal.theta).abs() < 1e-6);
    }

    #[test]
    fn sweep_diagnostics() {
        let grid = TimeGrid::new(0.0, 60.0, 1e-2, 100).unwrap();
        let s_values: Vec<f64> = (0..5).map(|k| 0.1 * k as f64).collect();
        let result = theta_sweep_lindblad(
            &driven_qubit(),
            0,
            &s_values,
            ThetaMethod::Growth,
            &grid,
            &GrowthOptions::default(),
        )
        .unwrap();
        assert!(result.points[0].theta.abs() < 1e-8);
        assert!(result.monotone);
        assert_eq!(result.convex, Some(true));
    }

    #[test]
    fn diagnostics_flag_violations() {
        let pts = |thetas: &[f64]| {
            thetas
                .iter()
                .enumerate()
                .map(|(i, &theta)| SweepPoint { s: 0.01 * i as f64, theta, error: 0.0 })
                .collect::<Vec<_>>()
        };
        let r = summarize_sweep(pts(&[0.0, -1.0, -1.5, -1.0]), None);
        assert!(!r.monotone);
        let r = summarize_sweep(pts(&[0.0, -0.1, -1.0]), None);
        assert!(r.monotone);
        assert_eq!(r.convex, Some(false));
    }

    #[test]
    fn coherence_method_rejects_negative_s() {
        let grid = TimeGrid::new(0.0, 1.0, 1e-2, 10).unwrap();
        assert!(matches!(
            theta_sweep(
                &MicromaserSpec::desk(),
                &[0.1, -0.1],
                ThetaMethod::Coherence,
                &grid,
                &GrowthOptions::default()
            ),
            Err(Error::NegativeS { .. })
        ));
    }
}
