//! Homodyne quantum filtering and the per-step efficiency classifier.
//!
//! With `X = L e^{iφ}` the measured signal is
//! `dy = Tr[(X + X†) π̄] dt + dW`, the normalized conditional state obeys
//!
//! ```text
//! dπ̄ = (-i[H, π̄] + D[L]π̄) dt + (Xπ̄ + π̄X† - Tr[(X+X†)π̄] π̄) dW
//! ```
//!
//! and the unnormalized (linear) filter obeys
//! `dπ = (-i[H, π] + D[L]π) dt + (Xπ + πX†) dy`.

// Provides float methods when std is absent from the build graph.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, HERMITIAN_TOL};
use crate::model::{DensityMatrix, LindbladSpec, TlmeSpec};

/// Upper bound on `dt·‖L‖²`.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Tolerance on `L† = -L e^{2iφ}`.
pub const GAUGE_CONDITION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    hamiltonian: ComplexMatrix,
    coupling: ComplexMatrix,
    homodyne_angle: f64,
    dt: f64,
    duration: f64,
}

impl FilterSpec {
    pub fn new(
        hamiltonian: ComplexMatrix,
        coupling: ComplexMatrix,
        homodyne_angle: f64,
        dt: f64,
        duration: f64,
    ) -> Result<Self> {
        let n = hamiltonian.rows();
        if !hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: hamiltonian.cols(),
            });
        }
        if coupling.rows() != n || coupling.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: coupling.rows(),
            });
        }
        let deviation = hamiltonian.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be positive"));
        }
        if !(duration >= dt && duration.is_finite()) {
            return Err(Error::InvalidParameter("duration must cover at least one step"));
        }
        if !homodyne_angle.is_finite() {
            return Err(Error::InvalidParameter("homodyne angle must be finite"));
        }
        let gram = coupling.adjoint().matmul(&coupling).hermitian_part();
        let value = dt * linalg::lambda_max_plus(&gram)?;
        if value >= STABILITY_LIMIT {
            return Err(Error::StabilityGuard { value });
        }
        Ok(Self {
            hamiltonian,
            coupling,
            homodyne_angle,
            dt,
            duration,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn homodyne_angle(&self) -> f64 {
        self.homodyne_angle
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Same system with a different step.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(
            self.hamiltonian.clone(),
            self.coupling.clone(),
            self.homodyne_angle,
            dt,
            self.duration,
        )
    }

    /// `X = L e^{iφ}`.
    pub fn measured_coupling(&self) -> ComplexMatrix {
        self.coupling.scale(C64::from_polar(1.0, self.homodyne_angle))
    }

    /// `‖L† + L e^{2iφ}‖_max`; zero when the signal carries no information.
    pub fn gauge_condition_residual(&self) -> f64 {
        let rotated = self.coupling.scale(C64::from_polar(1.0, 2.0 * self.homodyne_angle));
        (&self.coupling.adjoint() + &rotated).max_abs()
    }

    /// The deterministic part as a Lindbladian.
    pub fn lindblad(&self) -> Result<LindbladSpec> {
        LindbladSpec::new(self.hamiltonian.clone(), alloc::vec![self.coupling.clone()])
    }

    /// The TLME obtained from the linear filter when `dy ≡ 0`.
    pub fn zero_signal_tlme(&self) -> Result<TlmeSpec> {
        Ok(TlmeSpec::from_lindblad(self.lindblad()?))
    }

    fn drift(&self, pi: &ComplexMatrix) -> ComplexMatrix {
        let l = &self.coupling;
        let la = l.adjoint();
        let mut out = self.hamiltonian.commutator(pi).scale(C64::new(0.0, -1.0));
        out += &l.matmul(pi).matmul(&la);
        out.axpy_real(-0.5, &la.matmul(l).anticommutator(pi));
        out
    }
}

/// `Xπ + πX†`, with `πX† = (Xπ†)†` so only left products are formed.
fn measurement_map(x: &ComplexMatrix, pi: &ComplexMatrix) -> ComplexMatrix {
    &x.matmul(pi) + &x.matmul(&pi.adjoint()).adjoint()
}

/// Homodyne record of one run. `dy[k]` and `dw[k]` belong to step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalTrace {
    pub dy: Vec<f64>,
    pub dw: Vec<f64>,
    pub seed: u64,
}

/// Conditional evolution of the measured system and its homodyne signal.
///
/// Returns `n_steps + 1` normalized states, starting with `rho0`.
pub fn simulate_measured_system(
    spec: &FilterSpec,
    rho0: &DensityMatrix,
    seed: u64,
) -> Result<(Vec<DensityMatrix>, SignalTrace)> {
    check_dim(spec, rho0)?;
    let tr = rho0.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::InvalidParameter("initial state must have unit trace"));
    }
    let min = linalg::hermitian_eig(&rho0.hermitian_part())?.min_eigenvalue();
    if min < -linalg::PSD_REJECT {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = spec.measured_coupling();
    let x_sum = &x + &x.adjoint();
    let sqrt_dt = spec.dt.sqrt();
    let n = spec.n_steps();
    let mut states = Vec::with_capacity(n + 1);
    let mut dy = Vec::with_capacity(n);
    let mut dw = Vec::with_capacity(n);
    let mut pi = rho0.clone();
    states.push(pi.clone());
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let dw_k = sqrt_dt * z;
        let mean = x_sum.matmul(&pi).trace().re;
        let mut innovation = measurement_map(&x, &pi);
        innovation.axpy_real(-mean, &pi);
        let mut next = pi.clone();
        next.axpy_real(spec.dt, &spec.drift(&pi));
        next.axpy_real(dw_k, &innovation);
        let next = next.hermitian_part();
        let tr = next.trace().re;
        pi = next.scale_real(1.0 / tr);
        dy.push(mean * spec.dt + dw_k);
        dw.push(dw_k);
        states.push(pi.clone());
    }
    Ok((states, SignalTrace { dy, dw, seed }))
}

fn check_dim(spec: &FilterSpec, rho: &ComplexMatrix) -> Result<()> {
    if rho.rows() != spec.dim() || rho.cols() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: rho.rows(),
        });
    }
    Ok(())
}

fn check_signal(spec: &FilterSpec, signal: &SignalTrace) -> Result<()> {
    if signal.dy.len() != spec.n_steps() {
        return Err(Error::LengthMismatch {
            expected: spec.n_steps(),
            found: signal.dy.len(),
        });
    }
    Ok(())
}

/// Linear Ito filter driven by `signal`; no renormalization.
pub fn run_unnormalized_filter(
    spec: &FilterSpec,
    signal: &SignalTrace,
    pi0: &DensityMatrix,
) -> Result<Vec<DensityMatrix>> {
    check_dim(spec, pi0)?;
    check_signal(spec, signal)?;
    let x = spec.measured_coupling();
    let mut pi = pi0.clone();
    let mut out = Vec::with_capacity(signal.dy.len() + 1);
    out.push(pi.clone());
    for &dy in &signal.dy {
        let mut next = pi.clone();
        next.axpy_real(spec.dt, &spec.drift(&pi));
        next.axpy_real(dy, &measurement_map(&x, &pi));
        pi = next;
        out.push(pi.clone());
    }
    Ok(out)
}

/// The same linear filter in Stratonovich form, integrated with Heun's
/// predictor–corrector.
///
/// The Stratonovich drift is the Ito drift minus
/// `½(X²π + 2XπX† + πX†²)`.
pub fn run_stratonovich_filter(
    spec: &FilterSpec,
    signal: &SignalTrace,
    pi0: &DensityMatrix,
) -> Result<Vec<DensityMatrix>> {
    check_dim(spec, pi0)?;
    check_signal(spec, signal)?;
    let x = spec.measured_coupling();
    let x2 = x.matmul(&x);
    let drift = |pi: &ComplexMatrix| {
        let mut d = spec.drift(pi);
        d.axpy_real(-0.5, &measurement_map(&x2, pi));
        d.axpy_real(-1.0, &x.matmul(pi).matmul(&x.adjoint()));
        d
    };
    let mut pi = pi0.clone();
    let mut out = Vec::with_capacity(signal.dy.len() + 1);
    out.push(pi.clone());
    for &dy in &signal.dy {
        let (f0, g0) = (drift(&pi), measurement_map(&x, &pi));
        let mut pred = pi.clone();
        pred.axpy_real(spec.dt, &f0);
        pred.axpy_real(dy, &g0);
        let (f1, g1) = (drift(&pred), measurement_map(&x, &pred));
        let mut next = pi.clone();
        next.axpy_real(0.5 * spec.dt, &(&f0 + &f1));
        next.axpy_real(0.5 * dy, &(&g0 + &g1));
        pi = next;
        out.push(pi.clone());
    }
    Ok(out)
}

/// Classifier value at one step; all entries are already multiplied by
/// `dt` (or `dy`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepAlpha {
    /// `λ⁺[M_k]` with `M_k = -(X² + X†²) dt + 2(X + X†) dy_k`.
    pub total: f64,
    /// `λ⁺[-(X² + X†²) dt]`.
    pub dt_term: f64,
    /// `λ⁺[2(X + X†) dy_k]`.
    pub signal_term: f64,
    /// `‖2(X + X†) dy_k‖_max`; identically zero when the signal is
    /// uninformative.
    pub signal_term_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaReport {
    pub steps: Vec<StepAlpha>,
    /// `Σ_k λ⁺[M_k]`.
    pub cumulative: f64,
}

impl AlphaReport {
    /// Fraction of steps with `λ⁺[M_k] > 0`.
    pub fn positive_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.total > 0.0).count() as f64 / self.steps.len() as f64
    }

    pub fn max_signal_term_norm(&self) -> f64 {
        self.steps.iter().map(|s| s.signal_term_norm).fold(0.0, f64::max)
    }
}

/// Per-step norm-growth rate of the Stratonovich filter on a realized
/// signal. The increment `∘dy_k` equals `dy_k`; only integrand evaluation
/// is scheme dependent.
pub fn stratonovich_alpha(spec: &FilterSpec, signal: &SignalTrace) -> Result<AlphaReport> {
    check_signal(spec, signal)?;
    let x = spec.measured_coupling();
    let xa = x.adjoint();
    let dt_part = (&x.matmul(&x) + &xa.matmul(&xa)).scale_real(-spec.dt).hermitian_part();
    let quadrature = (&x + &xa).scale_real(2.0).hermitian_part();
    let dt_term = linalg::lambda_max_plus(&dt_part)?;
    let quad_eig = linalg::hermitian_eig(&quadrature)?;
    let quad_norm = quadrature.max_abs();

    let mut steps = Vec::with_capacity(signal.dy.len());
    let mut cumulative = 0.0;
    for &dy in &signal.dy {
        let mut m = dt_part.clone();
        m.axpy_real(dy, &quadrature);
        let total = linalg::lambda_max_plus(&m.hermitian_part())?;
        let extreme = if dy >= 0.0 {
            quad_eig.max_eigenvalue() * dy
        } else {
            quad_eig.min_eigenvalue() * dy
        };
        steps.push(StepAlpha {
            total,
            dt_term,
            signal_term: extreme.max(0.0),
            signal_term_norm: quad_norm * dy.abs(),
        });
        cumulative += total;
    }
    Ok(AlphaReport { steps, cumulative })
}

/// Filter-versus-truth discrepancy for matched and mismatched initial
/// states, in trace norm.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingReport {
    pub times: Vec<f64>,
    pub matched: Vec<f64>,
    pub mismatched: Vec<f64>,
}

impl TrackingReport {
    pub fn final_mismatched(&self) -> f64 {
        *self.mismatched.last().unwrap_or(&f64::NAN)
    }

    pub fn max_matched(&self) -> f64 {
        self.matched.iter().cloned().fold(0.0, f64::max)
    }
}

/// Runs the measured system from `rho0` and the linear filter from both
/// `rho0` and `pi0` on its signal. No condition on the coupling.
pub fn tracking_report(
    spec: &FilterSpec,
    rho0: &DensityMatrix,
    pi0: &DensityMatrix,
    seed: u64,
) -> Result<TrackingReport> {
    let (truth, signal) = simulate_measured_system(spec, rho0, seed)?;
    let matched = run_unnormalized_filter(spec, &signal, rho0)?;
    let mismatched = run_unnormalized_filter(spec, &signal, pi0)?;
    let distance = |a: &ComplexMatrix, b: &ComplexMatrix| -> Result<f64> {
        let tr = b.trace().re;
        linalg::trace_norm(&(a - &b.scale_real(1.0 / tr)).hermitian_part())
    };
    let mut report = TrackingReport {
        times: Vec::with_capacity(truth.len()),
        matched: Vec::with_capacity(truth.len()),
        mismatched: Vec::with_capacity(truth.len()),
    };
    for (k, state) in truth.iter().enumerate() {
        report.times.push(k as f64 * spec.dt);
        report.matched.push(distance(state, &matched[k])?);
        report.mismatched.push(distance(state, &mismatched[k])?);
    }
    Ok(report)
}

/// [`tracking_report`] restricted to couplings with `L† = -L e^{2iφ}`,
/// for which the signal carries no information about the state.
pub fn tracking_decoupling_demo(
    spec: &FilterSpec,
    rho0: &DensityMatrix,
    pi0: &DensityMatrix,
    seed: u64,
) -> Result<TrackingReport> {
    let residual = spec.gauge_condition_residual();
    if residual > GAUGE_CONDITION_TOL {
        return Err(Error::ConditionNotSatisfied { residual });
    }
    tracking_report(spec, rho0, pi0, seed)
}
