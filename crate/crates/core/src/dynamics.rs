//! Deterministic integration, quantum-jump unravelling and growth-rate
//! estimators.

// Provides float methods when std is absent from the build graph.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::mapping::{self, MappedSystem};
use crate::model::{DensityMatrix, Generator, LindbladSpec, SandwichForm};

/// Steps between renormalizations in [`log_growth_rate`].
pub const RENORM_INTERVAL: usize = 100;

/// `‖K‖·dt` above which RK4 is flagged as possibly inaccurate.
pub const STABILITY_WARN: f64 = 0.1;

/// Coherence magnitude below which a fit is refused.
pub const UNDERFLOW_FLOOR: f64 = 1e-12;

/// Uniform grid `t0, t0+dt, …, t1`, sampled every `sample_stride` steps.
///
/// The final time is always sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub sample_stride: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64, sample_stride: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid parameter"));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidGrid("dt must be positive"));
        }
        if t1 <= t0 {
            return Err(Error::InvalidGrid("t1 must exceed t0"));
        }
        if (t1 - t0) / dt < 1.0 - 1e-12 {
            return Err(Error::InvalidGrid("grid must contain at least one step"));
        }
        if sample_stride == 0 {
            return Err(Error::InvalidGrid("sample_stride must be positive"));
        }
        Ok(Self {
            t0,
            t1,
            dt,
            sample_stride,
        })
    }

    pub fn n_steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).round().max(1.0) as usize
    }

    /// Time after `k` steps.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps() {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt
        }
    }

    pub fn is_sample(&self, k: usize) -> bool {
        k % self.sample_stride == 0 || k == self.n_steps()
    }

    /// Step indices at which samples are recorded, starting with 0.
    pub fn sample_steps(&self) -> Vec<usize> {
        (0..=self.n_steps()).filter(|&k| self.is_sample(k)).collect()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.sample_steps().into_iter().map(|k| self.time(k)).collect()
    }
}

/// `‖K‖·dt` bound; RK4 results are unreliable once this reaches
/// [`STABILITY_WARN`].
pub fn stability_indicator<G: Generator + ?Sized>(generator: &G, dt: f64) -> f64 {
    generator.sandwich().norm_bound() * dt
}

fn rk4_step(k: &SandwichForm, rho: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let k1 = k.apply(rho);
    let mut tmp = rho.clone();
    tmp.axpy_real(0.5 * dt, &k1);
    let k2 = k.apply(&tmp);
    let mut tmp = rho.clone();
    tmp.axpy_real(0.5 * dt, &k2);
    let k3 = k.apply(&tmp);
    let mut tmp = rho.clone();
    tmp.axpy_real(dt, &k3);
    let k4 = k.apply(&tmp);

    let mut out = rho.clone();
    out.axpy_real(dt / 6.0, &k1);
    out.axpy_real(dt / 3.0, &k2);
    out.axpy_real(dt / 3.0, &k3);
    out.axpy_real(dt / 6.0, &k4);
    out
}

/// Classical RK4 on `dρ/dt = K(ρ)`, returning `(t, ρ(t))` at sample steps.
pub fn evolve_rk4<G: Generator + ?Sized>(
    generator: &G,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<Vec<(f64, DensityMatrix)>> {
    let mut out = Vec::new();
    evolve_rk4_with(generator, rho0, grid, |t, rho| out.push((t, rho.clone())))?;
    Ok(out)
}

/// RK4 integration that hands each sampled state to `observer` instead of
/// storing it.
pub fn evolve_rk4_with<G: Generator + ?Sized>(
    generator: &G,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    mut observer: impl FnMut(f64, &DensityMatrix),
) -> Result<DensityMatrix> {
    check_state_dim(generator.dim(), rho0)?;
    let k = generator.sandwich();
    let mut rho = rho0.clone();
    observer(grid.time(0), &rho);
    for step in 1..=grid.n_steps() {
        rho = rk4_step(&k, &rho, grid.dt);
        if grid.is_sample(step) {
            observer(grid.time(step), &rho);
        }
    }
    Ok(rho)
}

fn check_state_dim(dim: usize, rho: &ComplexMatrix) -> Result<()> {
    if rho.rows() != dim || rho.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.rows(),
        });
    }
    Ok(())
}

/// One quantum-jump trajectory.
///
/// `samples[i].1` holds `Re` and `Im` of each recorded observable, in pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub jump_events: Vec<(f64, usize)>,
    pub samples: Vec<(f64, Vec<f64>)>,
    pub final_weighted_trace: C64,
}

impl TrajectoryRecord {
    /// Observable `k` at sample `i`.
    pub fn observable(&self, i: usize, k: usize) -> C64 {
        let v = &self.samples[i].1;
        C64::new(v[2 * k], v[2 * k + 1])
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn expectation(op: &ComplexMatrix, psi: &[C64]) -> C64 {
    let opsi = op.matvec(psi);
    psi.iter().zip(&opsi).map(|(a, b)| a.conj() * b).sum::<C64>() / norm_sqr(psi)
}

/// Quantum-jump unraveller for a Lindblad equation.
///
/// Between jumps the unnormalized state follows `-i H_eff` with RK4; a jump
/// fires when `‖ψ‖²` drops below a uniform draw, its time interpolated
/// linearly inside the step.
#[derive(Clone, Debug)]
pub struct JumpMc {
    drift: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
    observables: Vec<ComplexMatrix>,
    weight: Option<ComplexMatrix>,
}

impl JumpMc {
    pub fn new(spec: &LindbladSpec) -> Self {
        Self {
            drift: spec.effective_hamiltonian().scale(C64::new(0.0, -1.0)),
            jumps: spec.jumps().to_vec(),
            observables: Vec::new(),
            weight: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Operators whose normalized expectation values are sampled.
    pub fn with_observables(mut self, observables: Vec<ComplexMatrix>) -> Result<Self> {
        for op in &observables {
            check_state_dim(self.dim(), op)?;
        }
        self.observables = observables;
        Ok(self)
    }

    /// Operator whose expectation is stored as `final_weighted_trace`
    /// (identity by default).
    pub fn with_weight(mut self, weight: ComplexMatrix) -> Result<Self> {
        check_state_dim(self.dim(), &weight)?;
        self.weight = Some(weight);
        Ok(self)
    }

    fn drift_step(&self, psi: &[C64], dt: f64) -> Vec<C64> {
        let f = |v: &[C64]| self.drift.matvec(v);
        let shifted = |base: &[C64], k: &[C64], h: f64| -> Vec<C64> {
            base.iter().zip(k).map(|(a, b)| a + b * h).collect()
        };
        let k1 = f(psi);
        let k2 = f(&shifted(psi, &k1, 0.5 * dt));
        let k3 = f(&shifted(psi, &k2, 0.5 * dt));
        let k4 = f(&shifted(psi, &k3, dt));
        (0..psi.len())
            .map(|i| psi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
            .collect()
    }

    /// Runs one trajectory, calling `on_sample(step, t, ψ)` with the
    /// normalized state at every sample step. Returns the jump record and
    /// the final normalized state.
    pub fn unravel<R: Rng + ?Sized>(
        &self,
        psi0: &[C64],
        grid: &TimeGrid,
        rng: &mut R,
        mut on_sample: impl FnMut(usize, f64, &[C64]),
    ) -> Result<(Vec<(f64, usize)>, Vec<C64>)> {
        if psi0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi0.len(),
            });
        }
        let norm = norm_sqr(psi0).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NonUnitInitialState { norm });
        }
        let mut psi = psi0.to_vec();
        let mut threshold: f64 = rng.random();
        let mut events = Vec::new();
        on_sample(0, grid.time(0), &psi);
        for step in 1..=grid.n_steps() {
            let t_prev = grid.time(step - 1);
            let t_now = grid.time(step);
            let n_prev = norm_sqr(&psi);
            psi = self.drift_step(&psi, t_now - t_prev);
            let n_now = norm_sqr(&psi);
            if n_now < threshold && !self.jumps.is_empty() {
                let frac = ((n_prev - threshold) / (n_prev - n_now)).clamp(0.0, 1.0);
                let t_jump = t_prev + frac * (t_now - t_prev);
                let candidates: Vec<Vec<C64>> = self.jumps.iter().map(|j| j.matvec(&psi)).collect();
                let weights: Vec<f64> = candidates.iter().map(|v| norm_sqr(v)).collect();
                let total: f64 = weights.iter().sum();
                if total > 0.0 {
                    let pick = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut channel = weights.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        acc += w;
                        if pick < acc {
                            channel = i;
                            break;
                        }
                    }
                    let inv = 1.0 / weights[channel].sqrt();
                    psi = candidates[channel].iter().map(|z| z * inv).collect();
                    events.push((t_jump, channel));
                }
                threshold = rng.random();
            }
            if grid.is_sample(step) {
                let inv = 1.0 / norm_sqr(&psi).sqrt();
                let normalized: Vec<C64> = psi.iter().map(|z| z * inv).collect();
                on_sample(step, t_now, &normalized);
            }
        }
        let inv = 1.0 / norm_sqr(&psi).sqrt();
        psi.iter_mut().for_each(|z| *z *= inv);
        Ok((events, psi))
    }

    /// One trajectory from a pure state, seeded with `seed`.
    pub fn run(&self, psi0: &[C64], grid: &TimeGrid, seed: u64) -> Result<TrajectoryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.record(psi0, grid, seed, &mut rng)
    }

    /// One trajectory whose initial pure state is drawn from the
    /// eigen-decomposition of `rho0` with the trajectory's own generator.
    pub fn run_mixed(&self, rho0: &DensityMatrix, grid: &TimeGrid, seed: u64) -> Result<TrajectoryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi0 = sample_pure_state(rho0, &mut rng)?;
        self.record(&psi0, grid, seed, &mut rng)
    }

    fn record(
        &self,
        psi0: &[C64],
        grid: &TimeGrid,
        seed: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrajectoryRecord> {
        let mut samples = Vec::new();
        let (jump_events, psi) = self.unravel(psi0, grid, rng, |_, t, psi| {
            let values = self
                .observables
                .iter()
                .flat_map(|op| {
                    let v = expectation(op, psi);
                    [v.re, v.im]
                })
                .collect();
            samples.push((t, values));
        })?;
        let final_weighted_trace = match &self.weight {
            Some(w) => expectation(w, &psi),
            None => C64::new(1.0, 0.0),
        };
        Ok(TrajectoryRecord {
            seed,
            jump_events,
            samples,
            final_weighted_trace,
        })
    }

    /// `|ψ⟩⟨ψ|` at every sample step of one trajectory.
    pub fn density_samples(
        &self,
        rho0: &DensityMatrix,
        grid: &TimeGrid,
        seed: u64,
    ) -> Result<Vec<DensityMatrix>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi0 = sample_pure_state(rho0, &mut rng)?;
        let mut out = Vec::new();
        self.unravel(&psi0, grid, &mut rng, |_, _, psi| {
            out.push(ComplexMatrix::outer(psi, psi));
        })?;
        Ok(out)
    }
}

/// Single trajectory with default settings.
pub fn jump_mc(
    spec: &LindbladSpec,
    psi0: &[C64],
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryRecord> {
    JumpMc::new(spec).run(psi0, grid, seed)
}

/// Seed of trajectory `index` in an ensemble.
pub fn trajectory_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Draws an eigenvector of `rho` with probability equal to its eigenvalue.
///
/// A pure `rho` (rank one) always returns the same vector up to phase.
pub fn sample_pure_state<R: Rng + ?Sized>(rho: &DensityMatrix, rng: &mut R) -> Result<Vec<C64>> {
    let eig = linalg::hermitian_eig(rho)?;
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_eigenvalue(),
        });
    }
    let pick = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if pick < acc && *w > 0.0 {
            chosen = i;
            break;
        }
    }
    let n = rho.rows();
    Ok((0..n).map(|r| eig.eigenvectors[(r, chosen)]).collect())
}

/// Mean of `|ψ⟩⟨ψ|` over `n_traj` trajectories at every sample step,
/// summed in trajectory order.
pub fn ensemble_density(
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one trajectory"));
    }
    let mc = JumpMc::new(spec);
    let times = grid.sample_times();
    let dim = spec.dim();
    let mut sums = vec![ComplexMatrix::zeros(dim, dim); times.len()];
    for i in 0..n_traj {
        let samples = mc.density_samples(rho0, grid, trajectory_seed(base_seed, i))?;
        for (acc, s) in sums.iter_mut().zip(&samples) {
            *acc += s;
        }
    }
    let inv = 1.0 / n_traj as f64;
    Ok(times
        .into_iter()
        .zip(sums)
        .map(|(t, s)| (t, s.scale_real(inv)))
        .collect())
}

/// `e^{αt} Tr[(X⊗w) ρ̃]` for a deterministic composite state.
pub fn weighted_observable(
    ms: &MappedSystem,
    rho_tilde: &DensityMatrix,
    x: &ComplexMatrix,
    t: f64,
) -> Result<C64> {
    let op = ms.weighted_observable_operator(x)?;
    check_state_dim(op.rows(), rho_tilde)?;
    let value = op.matmul(rho_tilde).trace();
    Ok(value * (ms.alpha() * t).exp())
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleEstimate {
    pub mean: C64,
    /// Standard error of the mean (real and imaginary parts combined).
    pub stderr: f64,
    /// Unbiased sample variance of the per-trajectory values.
    pub variance: f64,
}

/// Ensemble version of [`weighted_observable`].
///
/// `values` are per-trajectory `⟨ψ|X⊗w|ψ⟩` on unit-trace states and `scale`
/// the trace of the unnormalized initial embedding.
pub fn weighted_observable_ensemble(
    ms: &MappedSystem,
    values: &[C64],
    scale: f64,
    t: f64,
) -> Result<EnsembleEstimate> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("ensemble is empty"));
    }
    let factor = scale * (ms.alpha() * t).exp();
    let n = values.len() as f64;
    let mean = values.iter().sum::<C64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EnsembleEstimate {
        mean: mean * factor,
        stderr: factor * (variance / n).sqrt(),
        variance: factor * factor * variance,
    })
}

/// Options for [`log_growth_rate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthOptions {
    /// Maximum allowed difference between the slopes of the last two
    /// quarter-grid windows.
    pub tolerance: f64,
    pub renorm_interval: usize,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            renorm_interval: RENORM_INTERVAL,
        }
    }
}

/// Growth-rate estimate; `theta` is the slope over the final half of the
/// grid and the window slopes cover its two halves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthEstimate {
    pub theta: f64,
    pub previous_slope: f64,
    pub last_slope: f64,
}

/// Linear dynamics whose norm is tracked by periodic renormalization.
pub trait GrowthSystem {
    fn step(&mut self, dt: f64);

    /// Divides the state by its trace and returns that trace.
    fn renormalize(&mut self) -> Result<f64>;
}

/// Integrates `sys` over `grid`, accumulating `Σ log Tr` at each
/// renormalization, and returns the growth rate of the trace.
pub fn log_growth_rate<S: GrowthSystem + ?Sized>(
    sys: &mut S,
    grid: &TimeGrid,
    options: &GrowthOptions,
) -> Result<GrowthEstimate> {
    let n = grid.n_steps();
    if n < 4 {
        return Err(Error::InvalidGrid("growth estimate needs at least 4 steps"));
    }
    let interval = options.renorm_interval.max(1);
    let (half, three_q) = (n / 2, (3 * n) / 4);
    let mut log_trace = 0.0;
    let mut marks = [0.0; 3];
    for k in 1..=n {
        sys.step(grid.dt);
        let boundary = k == half || k == three_q || k == n;
        if k % interval == 0 || boundary {
            let tr = sys.renormalize()?;
            log_trace += tr.ln();
        }
        if k == half {
            marks[0] = log_trace;
        }
        if k == three_q {
            marks[1] = log_trace;
        }
        if k == n {
            marks[2] = log_trace;
        }
    }
    let (th, tq, te) = (grid.time(half), grid.time(three_q), grid.time(n));
    let previous_slope = (marks[1] - marks[0]) / (tq - th);
    let last_slope = (marks[2] - marks[1]) / (te - tq);
    let theta = (marks[2] - marks[0]) / (te - th);
    if !theta.is_finite() || (previous_slope - last_slope).abs() >= options.tolerance {
        return Err(Error::NotConverged {
            previous: previous_slope,
            last: last_slope,
        });
    }
    Ok(GrowthEstimate {
        theta,
        previous_slope,
        last_slope,
    })
}

struct DensityGrowth {
    k: SandwichForm,
    rho: ComplexMatrix,
}

impl GrowthSystem for DensityGrowth {
    fn step(&mut self, dt: f64) {
        self.rho = rk4_step(&self.k, &self.rho, dt);
    }

    fn renormalize(&mut self) -> Result<f64> {
        let tr = self.rho.trace().re;
        if !tr.is_finite() {
            return Err(Error::NonFinite);
        }
        if tr <= 0.0 {
            return Err(Error::InvalidParameter("trace lost positivity during growth estimate"));
        }
        self.rho = self.rho.scale_real(1.0 / tr);
        Ok(tr)
    }
}

/// `θ = lim (1/t) log Tr ρ(t)` from the maximally mixed state.
pub fn theta_from_growth<G: Generator + ?Sized>(
    generator: &G,
    grid: &TimeGrid,
) -> Result<GrowthEstimate> {
    let n = generator.dim();
    let rho0 = ComplexMatrix::identity(n).scale_real(1.0 / n as f64);
    theta_from_growth_with(generator, &rho0, grid, &GrowthOptions::default())
}

pub fn theta_from_growth_with<G: Generator + ?Sized>(
    generator: &G,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    options: &GrowthOptions,
) -> Result<GrowthEstimate> {
    check_state_dim(generator.dim(), rho0)?;
    let mut sys = DensityGrowth {
        k: generator.sandwich(),
        rho: rho0.clone(),
    };
    log_growth_rate(&mut sys, grid, options)
}

/// Least-squares slope of `log|c(t)|` over the final half of `times`.
///
/// Fails with `SignalUnderflow` if `|c|` falls below [`UNDERFLOW_FLOOR`]
/// at or before the start of the fit window.
pub fn fit_log_coherence(times: &[f64], values: &[C64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.len() < 4 {
        return Err(Error::InvalidGrid("coherence fit needs at least 4 samples"));
    }
    let t_start = times[0] + 0.5 * (times[times.len() - 1] - times[0]);
    let start = times.iter().position(|&t| t >= t_start - 1e-12).unwrap_or(0);
    for v in &values[..=start] {
        if !(v.norm() >= UNDERFLOW_FLOOR) {
            return Err(Error::SignalUnderflow { magnitude: v.norm() });
        }
    }
    let window: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&values[start..])
        .map(|(&t, v)| (t, v.norm()))
        .collect();
    if let Some(&(_, m)) = window.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(Error::SignalUnderflow { magnitude: m });
    }
    if window.len() < 2 {
        return Err(Error::InvalidGrid("fit window has fewer than 2 samples"));
    }
    let n = window.len() as f64;
    let mean_t = window.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = window.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, m) in &window {
        sxy += (t - mean_t) * (m.ln() - mean_y);
        sxx += (t - mean_t) * (t - mean_t);
    }
    Ok(sxy / sxx)
}

/// Coherence-decay estimate of `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceFit {
    pub theta: f64,
    /// Zero for deterministic runs; batch-means error for ensembles.
    pub stderr: f64,
    pub times: Vec<f64>,
    /// `Tr[(I⊗w) ρ̃(t)]`, scaled back by the embedding trace.
    pub coherence: Vec<C64>,
}

/// Deterministic coherence estimate: evolve the composite Lindblad equation
/// from the embedding of `rho0` and fit the weighted trace.
pub fn theta_from_coherence(
    ms: &MappedSystem,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<CoherenceFit> {
    let embedded = mapping::initial_embedding(ms, rho0)?;
    let w = ms.weight_operator();
    let mut times = Vec::new();
    let mut coherence = Vec::new();
    evolve_rk4_with(&ms.lindblad, &embedded, grid, |t, rho| {
        times.push(t);
        coherence.push(w.matmul(rho).trace());
    })?;
    let theta = fit_log_coherence(&times, &coherence)?;
    Ok(CoherenceFit {
        theta,
        stderr: 0.0,
        times,
        coherence,
    })
}

/// Number of batches used for the ensemble error estimate.
pub const COHERENCE_BATCHES: usize = 20;

/// Ensemble coherence estimate from per-trajectory series
/// `series[i][k] = ⟨ψ_i(t_k)|I⊗w|ψ_i(t_k)⟩`.
///
/// The error is the spread of slopes fitted to batch means.
pub fn theta_from_coherence_ensemble(
    times: &[f64],
    series: &[Vec<C64>],
    scale: f64,
) -> Result<CoherenceFit> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("ensemble is empty"));
    }
    let mean_of = |rows: &[Vec<C64>]| -> Result<Vec<C64>> {
        let mut acc = vec![C64::new(0.0, 0.0); times.len()];
        for row in rows {
            if row.len() != times.len() {
                return Err(Error::LengthMismatch {
                    expected: times.len(),
                    found: row.len(),
                });
            }
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let inv = scale / rows.len() as f64;
        Ok(acc.into_iter().map(|a| a * inv).collect())
    };
    let coherence = mean_of(series)?;
    let theta = fit_log_coherence(times, &coherence)?;

    let batches = COHERENCE_BATCHES.min(series.len());
    let stderr = if batches >= 2 {
        let size = series.len() / batches;
        let mut slopes = Vec::with_capacity(batches);
        for b in 0..batches {
            let end = if b + 1 == batches { series.len() } else { (b + 1) * size };
            slopes.push(fit_log_coherence(times, &mean_of(&series[b * size..end])?)?);
        }
        let m = slopes.iter().sum::<f64>() / batches as f64;
        let var = slopes.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (batches as f64 - 1.0);
        (var / batches as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(CoherenceFit {
        theta,
        stderr,
        times: times.to_vec(),
        coherence,
    })
}

/// Per-trajectory weighted-trace series for an ensemble of `n_traj`
/// trajectories started from the normalized embedding of `rho0`. Returns
/// the sample times, the series, and the embedding trace.
pub fn coherence_series(
    ms: &MappedSystem,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    n_traj: usize,
    base_seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<C64>>, f64)> {
    let (embedded, scale) = mapping::normalized_embedding(ms, rho0)?;
    let mc = JumpMc::new(&ms.lindblad).with_observables(vec![ms.weight_operator()])?;
    let mut series = Vec::with_capacity(n_traj);
    for i in 0..n_traj {
        let rec = mc.run_mixed(&embedded, grid, trajectory_seed(base_seed, i))?;
        series.push((0..rec.samples.len()).map(|k| rec.observable(k, 0)).collect());
    }
    Ok((grid.sample_times(), series, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::paulis;
    use crate::mapping::build_diagonal;
    use crate::model::tests::{decay_qubit, random_lindblad, random_matrix};
    use crate::model::{tilted_generator, TlmeSpec};

    fn excited_vec() -> Vec<C64> {
        vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
    }

    fn driven_qubit() -> LindbladSpec {
        LindbladSpec::new(paulis::sigma_x(), vec![paulis::sigma_minus()]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0.1, 1).is_ok());
        assert!(TimeGrid::new(1.0, 0.0, 0.1, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 2.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.1, 0).is_err());
        let g = TimeGrid::new(0.0, 1.0, 0.1, 3).unwrap();
        assert_eq!(g.n_steps(), 10);
        assert_eq!(g.sample_steps(), vec![0, 3, 6, 9, 10]);
        assert_eq!(g.time(10), 1.0);
    }

    #[test]
    fn zero_generator_is_static() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_matrix(&mut rng, 3);
        let grid = TimeGrid::new(0.0, 1.0, 0.01, 10).unwrap();
        let out = evolve_rk4(&LindbladSpec::trivial(3), &rho, &grid).unwrap();
        assert_eq!(out.len(), 11);
        assert!(out.iter().all(|(_, r)| r == &rho));
    }

    #[test]
    fn decay_qubit_rk4() {
        let grid = TimeGrid::new(0.0, 1.0, 1e-4, 10_000).unwrap();
        let out = evolve_rk4(&decay_qubit(), &paulis::p1(), &grid).unwrap();
        let (t, rho) = out.last().unwrap();
        assert_eq!(*t, 1.0);
        assert!((rho[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn tilted_decay_trace_ode() {
        for s in [-0.5, 0.4, 1.5] {
            let spec = tilted_generator(&decay_qubit(), 0, s).unwrap();
            let grid = TimeGrid::new(0.0, 1.0, 1e-3, 1000).unwrap();
            let rho = evolve_rk4(&spec, &paulis::p1(), &grid).unwrap().pop().unwrap().1;
            let expected = 1.0 + ((-s).exp() - 1.0) * (1.0 - (-1.0f64).exp());
            assert!((rho.trace().re - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_dimension_mismatch() {
        let grid = TimeGrid::new(0.0, 1.0, 0.1, 1).unwrap();
        assert!(matches!(
            evolve_rk4(&decay_qubit(), &ComplexMatrix::identity(3), &grid),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = random_lindblad(&mut rng, 3, 2);
        let rho0 = ComplexMatrix::identity(3).scale_real(1.0 / 3.0);
        let run = |dt| {
            let grid = TimeGrid::new(0.0, 1.0, dt, usize::MAX).unwrap();
            evolve_rk4(&spec, &rho0, &grid).unwrap().pop().unwrap().1
        };
        let reference = run(1e-4);
        let e1 = (&run(0.1) - &reference).max_abs();
        let e2 = (&run(0.05) - &reference).max_abs();
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn no_jumps_is_schrodinger() {
        let spec = LindbladSpec::new(paulis::sigma_x(), vec![]).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 1e-3, 100).unwrap();
        let rec = JumpMc::new(&spec)
            .with_observables(vec![paulis::p1()])
            .unwrap()
            .run(&excited_vec(), &grid, 7)
            .unwrap();
        assert!(rec.jump_events.is_empty());
        let last = rec.samples.len() - 1;
        let pe = rec.observable(last, 0).re;
        assert!((pe - 1.0f64.cos().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn decay_qubit_single_jump() {
        let grid = TimeGrid::new(0.0, 20.0, 1e-2, 2000).unwrap();
        for seed in 0..50 {
            let rec = jump_mc(&decay_qubit(), &excited_vec(), &grid, seed).unwrap();
            assert!(rec.jump_events.len() <= 1);
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let spec = driven_qubit();
        let grid = TimeGrid::new(0.0, 5.0, 1e-3, 50).unwrap();
        let mc = JumpMc::new(&spec)
            .with_observables(vec![paulis::sigma_z()])
            .unwrap();
        let a = mc.run(&excited_vec(), &grid, 42).unwrap();
        let b = mc.run(&excited_vec(), &grid, 42).unwrap();
        assert_eq!(a, b);
        let c = mc.run(&excited_vec(), &grid, 43).unwrap();
        assert_ne!(a.jump_events, c.jump_events);
        for w in a.jump_events.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn non_unit_state_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 0.1, 1).unwrap();
        let psi = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(
            jump_mc(&decay_qubit(), &psi, &grid, 0),
            Err(Error::NonUnitInitialState { .. })
        ));
    }

    #[test]
    fn mixed_state_sampling_frequencies() {
        let rho = ComplexMatrix::from_real_diag(&[0.25, 0.75]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4000;
        let hits = (0..n)
            .filter(|_| sample_pure_state(&rho, &mut rng).unwrap()[1].norm() > 0.5)
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / n as f64).sqrt());
    }

    #[test]
    fn weighted_observable_initial_trace() {
        let spec = tilted_generator(&decay_qubit(), 0, 0.3).unwrap();
        let ms = build_diagonal(&spec).unwrap();
        let rho0 = ComplexMatrix::from_real_diag(&[0.4, 0.6]);
        let e = mapping::initial_embedding(&ms, &rho0).unwrap();
        let v = weighted_observable(&ms, &e, &ComplexMatrix::identity(2), 0.0).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(weighted_observable(&ms, &e, &ComplexMatrix::identity(3), 0.0).is_err());
    }

    #[test]
    fn theta_zero_for_trace_preserving() {
        let spec = TlmeSpec::from_lindblad(driven_qubit());
        let grid = TimeGrid::new(0.0, 40.0, 1e-2, 100).unwrap();
        let est = theta_from_growth(&spec, &grid).unwrap();
        assert!(est.theta.abs() < 1e-9);
    }

    #[test]
    fn growth_flags_short_runs() {
        let spec = tilted_generator(&driven_qubit(), 0, 0.2).unwrap();
        let grid = TimeGrid::new(0.0, 0.4, 1e-2, 100).unwrap();
        assert!(matches!(
            theta_from_growth(&spec, &grid),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn coherence_matches_growth() {
        let spec = tilted_generator(&driven_qubit(), 0, 0.2).unwrap();
        let grid = TimeGrid::new(0.0, 60.0, 1e-2, 10).unwrap();
        let growth = theta_from_growth(&spec, &grid).unwrap().theta;
        let ms = build_diagonal(&spec).unwrap();
        let fit = theta_from_coherence(&ms, &paulis::p0(), &grid).unwrap();
        assert!(growth < 0.0);
        assert!((fit.theta - growth).abs() < 1e-5, "{} vs {}", fit.theta, growth);
    }

    #[test]
    fn coherence_zero_at_s_zero() {
        let spec = tilted_generator(&driven_qubit(), 0, 0.0).unwrap();
        let ms = build_diagonal(&spec).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 1e-2, 10).unwrap();
        let fit = theta_from_coherence(&ms, &paulis::p0(), &grid).unwrap();
        assert!(fit.theta.abs() < 1e-8);
    }

    #[test]
    fn coherence_underflow_reported() {
        let spec = tilted_generator(&driven_qubit(), 0, 30.0).unwrap();
        let ms = build_diagonal(&spec).unwrap();
        let grid = TimeGrid::new(0.0, 200.0, 1e-2, 100).unwrap();
        assert!(matches!(
            theta_from_coherence(&ms, &paulis::p0(), &grid),
            Err(Error::SignalUnderflow { .. })
        ));
    }
}
