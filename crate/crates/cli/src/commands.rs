//! The five subcommands. Each returns its output documents; nothing here
//! touches the filesystem.

use std::time::Instant;

use rayon::prelude::*;
use tlme_core::dynamics::{self, GrowthOptions, JumpMc, TimeGrid};
use tlme_core::linalg::hermitian_eig;
use tlme_core::mapping::{self, MappedSystem};
use tlme_core::qfilter::{self, FilterSpec};
use tlme_core::trajstats::{self, MicromaserSpec, SweepPoint, ThetaMethod};
use tlme_core::{ComplexMatrix, DensityMatrix, C64};

use crate::config::{
    block, initial_state, EvolveScheme, MethodName, Model, RunConfig, SchemeName,
};
use crate::csv::{format_float, Cell, CsvDoc, Provenance};
use crate::error::CliError;

/// `α` above this is reported as inefficient.
pub const ALPHA_EFFICIENT_TOL: f64 = 1e-12;
/// Trace drift allowed for the composite Lindblad state over the run.
pub const TRACE_DRIFT_TOL: f64 = 1e-9;
/// Most negative eigenvalue tolerated in the composite state.
pub const MIN_EIGENVALUE_TOL: f64 = -1e-8;
/// Pump rate of the paper-scale micromaser.
pub const PAPER_PUMP_RATE: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    MapCheck,
    ThetaSweep,
    Mc,
    FilterDemo,
    Evolve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::MapCheck => "map-check",
            Self::ThetaSweep => "theta-sweep",
            Self::Mc => "mc",
            Self::FilterDemo => "filter-demo",
            Self::Evolve => "evolve",
        }
    }
}

/// Flags that modify a run beyond its config.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub seed: Option<u64>,
    pub paper_scale: bool,
    pub timing: bool,
}

/// Result of a command before anything is written.
#[derive(Clone, Debug)]
pub struct Outputs {
    /// `false` if a check the command performs failed.
    pub passed: bool,
    pub files: Vec<(String, CsvDoc)>,
    pub summary: Vec<String>,
}

pub fn execute(
    cfg: &RunConfig,
    command: Command,
    flags: Flags,
    warn: &mut dyn FnMut(&str),
) -> Result<Outputs, CliError> {
    let meta = Provenance {
        command: command.name().to_string(),
        config_hash: cfg.hash(),
        seed: flags.seed.or(cfg.seed).unwrap_or(0),
    };
    if flags.paper_scale && command != Command::ThetaSweep {
        warn("--paper-scale only affects theta-sweep; ignored");
    }
    match command {
        Command::MapCheck => map_check(cfg, &meta),
        Command::ThetaSweep => theta_sweep(cfg, &meta, flags, warn),
        Command::Mc => mc(cfg, &meta),
        Command::FilterDemo => filter_demo(cfg, &meta),
        Command::Evolve => evolve(cfg, &meta),
    }
}

fn build_scheme(
    scheme: SchemeName,
    tlme: &tlme_core::TlmeSpec,
) -> Result<MappedSystem, CliError> {
    match scheme {
        SchemeName::Diagonal => {
            if !tlme.is_hermiticity_preserving() {
                return Err(CliError::SchemeUnavailable(
                    "diagonal scheme requires a Hermiticity-preserving TLME".into(),
                ));
            }
            Ok(mapping::build_diagonal(tlme)?)
        }
        SchemeName::OffDiagonal => Ok(mapping::build_offdiagonal(tlme)?),
    }
}

fn scheme_label(scheme: SchemeName) -> &'static str {
    match scheme {
        SchemeName::Diagonal => "diagonal",
        SchemeName::OffDiagonal => "off_diagonal",
    }
}

fn efficiency_label(alpha: f64) -> &'static str {
    if alpha > ALPHA_EFFICIENT_TOL {
        "INEFFICIENT"
    } else {
        "EFFICIENT"
    }
}

/// A grid whose only samples are the endpoints.
fn endpoint_grid(t: f64, dt: f64) -> Result<TimeGrid, CliError> {
    let probe = TimeGrid::new(0.0, t, dt, 1)?;
    Ok(TimeGrid::new(0.0, t, dt, probe.n_steps())?)
}

fn map_check(cfg: &RunConfig, meta: &Provenance) -> Result<Outputs, CliError> {
    let tlme = cfg.model()?.resolve()?.tlme()?;
    let b = block(&cfg.map_check, "map_check")?;
    let hp = tlme.is_hermiticity_preserving();
    let schemes = match &b.schemes {
        Some(list) if list.is_empty() => {
            return Err(CliError::Config("map_check.schemes is empty".into()))
        }
        Some(list) => list.clone(),
        None if hp => vec![SchemeName::Diagonal, SchemeName::OffDiagonal],
        None => vec![SchemeName::OffDiagonal],
    };
    let rho0 = initial_state(&b.initial_state, tlme.dim())?;
    let grid = endpoint_grid(b.t, b.dt)?;
    let direct = dynamics::evolve_rk4_with(&tlme, &rho0, &grid, |_, _| {})?;
    let decomposition = mapping::compute_alpha(&tlme)?;

    let mut doc = CsvDoc::new(
        meta,
        &[
            ("t", format_float(b.t)),
            ("dt", format_float(b.dt)),
            ("tolerance", format_float(b.tolerance)),
        ],
        &[
            "scheme",
            "max_discrepancy",
            "alpha",
            "alpha_l",
            "alpha_r",
            "efficiency",
            "trace_drift",
            "min_eigenvalue",
            "pass",
        ],
    );
    let mut passed = true;
    let mut summary = vec![format!(
        "TLME alpha = {} (alpha_l = {}, alpha_r = {})",
        decomposition.alpha(),
        decomposition.alpha_l,
        decomposition.alpha_r
    )];
    for scheme in schemes {
        let ms = build_scheme(scheme, &tlme)?;
        let embedded = mapping::initial_embedding(&ms, &rho0)?;
        let final_state = dynamics::evolve_rk4_with(&ms.lindblad, &embedded, &grid, |_, _| {})?;
        let recovered = mapping::recover_state(&ms, &final_state, b.t)?;
        let discrepancy = (&recovered - &direct).max_abs();
        let drift = (final_state.trace() - embedded.trace()).norm();
        let min_eig = hermitian_eig(&final_state.hermitian_part())?.min_eigenvalue();
        let ok = discrepancy <= b.tolerance
            && drift <= TRACE_DRIFT_TOL
            && min_eig >= MIN_EIGENVALUE_TOL;
        passed &= ok;
        let alpha = ms.alpha();
        doc.row(&[
            scheme_label(scheme).into(),
            discrepancy.into(),
            alpha.into(),
            ms.alpha_l.into(),
            ms.alpha_r.into(),
            efficiency_label(alpha).into(),
            drift.into(),
            min_eig.into(),
            if ok { "pass" } else { "fail" }.into(),
        ]);
        summary.push(format!(
            "{}: {} max discrepancy {discrepancy:e}, alpha {alpha} {}",
            scheme_label(scheme),
            if ok { "PASS" } else { "FAIL" },
            efficiency_label(alpha)
        ));
    }
    Ok(Outputs {
        passed,
        files: vec![("map_check.csv".into(), doc)],
        summary,
    })
}

/// Paper-scale micromaser: pump rate raised, truncation grown until the
/// stationary `⟨n⟩` sits below half the Fock dimension.
pub fn paper_scale_micromaser(base: &MicromaserSpec) -> Result<MicromaserSpec, CliError> {
    let mut spec = MicromaserSpec {
        pump_rate: PAPER_PUMP_RATE,
        ..*base
    };
    spec.fock_dim = spec.fock_dim.max(64);
    while !spec.truncation_adequate()? {
        spec.fock_dim *= 2;
    }
    Ok(spec)
}

fn theta_sweep(
    cfg: &RunConfig,
    meta: &Provenance,
    flags: Flags,
    warn: &mut dyn FnMut(&str),
) -> Result<Outputs, CliError> {
    let b = block(&cfg.theta_sweep, "theta_sweep")?;
    if b.s_values.is_empty() {
        return Err(CliError::Config("theta_sweep.s_values is empty".into()));
    }
    let model = cfg.model()?.resolve()?;
    let mut method = match b.method {
        MethodName::Growth => ThetaMethod::Growth,
        MethodName::PopulationGrowth => ThetaMethod::PopulationGrowth,
        MethodName::Coherence => ThetaMethod::Coherence,
        MethodName::CoherenceMc => ThetaMethod::CoherenceMc {
            n_traj: b.n_traj.ok_or_else(|| {
                CliError::Config("coherence_mc needs theta_sweep.n_traj".into())
            })?,
            base_seed: meta.seed,
        },
    };
    let mut label = b.method.label();
    let mut dt = b.dt;
    let mut extra = Vec::new();
    let model = match (model, flags.paper_scale) {
        (Model::Micromaser(spec), true) => {
            let paper = paper_scale_micromaser(&spec)?;
            // Explicit RK4 needs dt below the inverse of the fastest rate.
            dt = dt.min(0.1 / paper.pump_rate);
            warn(&format!(
                "paper-scale run: pump rate {}, fock_dim {}, dt {dt}, population growth only; \
                 this is a long computation",
                paper.pump_rate, paper.fock_dim
            ));
            method = ThetaMethod::PopulationGrowth;
            label = MethodName::PopulationGrowth.label();
            extra.push(("paper_scale", "true".to_string()));
            extra.push(("fock_dim", paper.fock_dim.to_string()));
            Model::Micromaser(paper)
        }
        (_, true) => {
            return Err(CliError::Config(
                "--paper-scale requires a micromaser model".into(),
            ))
        }
        (m @ (Model::Micromaser(_) | Model::Lindblad(_)), false) => m,
        _ => {
            return Err(CliError::Config(
                "theta-sweep needs a lindblad or micromaser model".into(),
            ))
        }
    };
    if method != ThetaMethod::Growth && method != ThetaMethod::PopulationGrowth {
        if let Some(&s) = b.s_values.iter().find(|&&s| !(s >= 0.0)) {
            return Err(CliError::Model(tlme_core::Error::NegativeS { s }));
        }
    }
    let grid = TimeGrid::new(0.0, b.t1, dt, b.sample_stride)?;
    let options = GrowthOptions {
        tolerance: b.tolerance,
        renorm_interval: b.renorm_interval,
    };
    let results: Vec<(tlme_core::Result<SweepPoint>, f64)> = b
        .s_values
        .par_iter()
        .map(|&s| {
            let start = Instant::now();
            let point = match &model {
                Model::Micromaser(spec) => {
                    trajstats::micromaser_theta_point(spec, s, method, &grid, &options)
                }
                Model::Lindblad(base) => {
                    trajstats::theta_point(base, b.channel, s, method, &grid, &options)
                }
                _ => unreachable!("model kind checked above"),
            };
            (point, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut doc = CsvDoc::new(
        meta,
        &extra,
        &["s", "theta", "stderr", "method", "wall_time_s"],
    );
    let mut points = Vec::with_capacity(results.len());
    for (point, wall) in results {
        let p = point?;
        doc.row(&[
            p.s.into(),
            p.theta.into(),
            p.error.into(),
            label.into(),
            if flags.timing { wall.into() } else { Cell::Empty },
        ]);
        points.push(p);
    }
    let warning = match &model {
        Model::Micromaser(spec) => trajstats::truncation_warning(spec)?,
        _ => None,
    };
    if let Some(mean) = warning {
        warn(&format!(
            "stationary <n> = {mean} is not below fock_dim/2; truncation may bias theta"
        ));
    }
    let drop = trajstats::steep_drop_location(&points);
    let result = trajstats::summarize_sweep(points, warning);
    let convex = match result.convex {
        Some(c) => c.to_string(),
        None => "n/a".into(),
    };
    let mut summary = vec![format!("monotone: {}; convex: {convex}", result.monotone)];
    if let Some(s) = drop {
        summary.push(format!("steepest drop near s = {s:e}"));
    }
    for line in &summary {
        doc.comment(line);
    }
    Ok(Outputs {
        passed: true,
        files: vec![("theta_sweep.csv".into(), doc)],
        summary,
    })
}

/// Per-trajectory `⟨ψ(t_k)|1⊗w|ψ(t_k)⟩` for `n_traj` trajectories, in
/// trajectory order regardless of how rayon schedules them.
pub fn parallel_coherence_series(
    ms: &MappedSystem,
    embedded: &DensityMatrix,
    grid: &TimeGrid,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<Vec<C64>>, CliError> {
    let mc = JumpMc::new(&ms.lindblad).with_observables(vec![ms.weight_operator()])?;
    let series = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let rec = mc.run_mixed(embedded, grid, dynamics::trajectory_seed(base_seed, i))?;
            Ok((0..rec.samples.len()).map(|k| rec.observable(k, 0)).collect())
        })
        .collect::<tlme_core::Result<Vec<Vec<C64>>>>()?;
    Ok(series)
}

fn mc(cfg: &RunConfig, meta: &Provenance) -> Result<Outputs, CliError> {
    let b = block(&cfg.mc, "mc")?;
    if b.n_traj < 2 {
        return Err(CliError::Config("mc.n_traj must be at least 2".into()));
    }
    let model = cfg.model()?.resolve()?;
    let counted_base = match &model {
        Model::Lindblad(base) => Some(base.clone()),
        Model::Micromaser(spec) => Some(trajstats::build_micromaser(spec)?),
        _ => None,
    };
    let ms = match (counted_base, b.s) {
        (Some(base), Some(s)) => {
            if b.scheme.is_some() {
                return Err(CliError::Config(
                    "mc.scheme applies to tilted and tlme models only".into(),
                ));
            }
            trajstats::build_unitary_coupling(&base, b.channel, s)?
        }
        (Some(_), None) => {
            return Err(CliError::Config(
                "mc needs a counting field s for lindblad and micromaser models".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(CliError::Config(
                "mc.s applies to lindblad and micromaser models only".into(),
            ))
        }
        (None, None) => build_scheme(b.scheme.unwrap_or(SchemeName::OffDiagonal), &model.tlme()?)?,
    };
    let rho0 = initial_state(&b.initial_state, ms.system_dim())?;
    let grid = TimeGrid::new(0.0, b.t1, b.dt, b.sample_stride)?;
    let (embedded, scale) = mapping::normalized_embedding(&ms, &rho0)?;
    let series = parallel_coherence_series(&ms, &embedded, &grid, b.n_traj, meta.seed)?;
    let times = grid.sample_times();

    let mut doc = CsvDoc::new(
        meta,
        &[("alpha", format_float(ms.alpha()))],
        &["t", "mean_re_w", "stderr", "n_trajectories"],
    );
    let n = b.n_traj as f64;
    for (k, &t) in times.iter().enumerate() {
        let factor = scale * (ms.alpha() * t).exp();
        let mean = series.iter().map(|row| row[k].re).sum::<f64>() / n;
        let var = series.iter().map(|row| (row[k].re - mean).powi(2)).sum::<f64>() / (n - 1.0);
        doc.row(&[
            t.into(),
            (factor * mean).into(),
            (factor * (var / n).sqrt()).into(),
            Cell::Int(b.n_traj as u64),
        ]);
    }
    let fit = dynamics::theta_from_coherence_ensemble(&times, &series, scale)?;
    let slope = fit.theta + ms.alpha();
    let line = format!(
        "slope: {}; slope_stderr: {}",
        format_float(slope),
        format_float(fit.stderr)
    );
    doc.comment(&line);
    Ok(Outputs {
        passed: true,
        files: vec![("mc.csv".into(), doc)],
        summary: vec![line],
    })
}

fn entry_columns(prefix: &str, n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("re_{prefix}{i}_{j}"));
            cols.push(format!("im_{prefix}{i}_{j}"));
        }
    }
    cols
}

fn push_entries(cells: &mut Vec<Cell>, m: &ComplexMatrix) {
    for z in m.as_slice() {
        cells.push(z.re.into());
        cells.push(z.im.into());
    }
}

fn filter_demo(cfg: &RunConfig, meta: &Provenance) -> Result<Outputs, CliError> {
    let f = block(&cfg.filter, "filter")?;
    let spec = FilterSpec::new(
        f.hamiltonian.to_matrix("filter.hamiltonian")?,
        f.coupling.to_matrix("filter.coupling")?,
        f.homodyne_angle,
        f.dt,
        f.duration,
    )?;
    let rho0 = f.initial_state.to_matrix("filter.initial_state")?;
    let pi0 = match &f.filter_initial_state {
        Some(m) => m.to_matrix("filter.filter_initial_state")?,
        None => rho0.clone(),
    };
    let (_, signal) = qfilter::simulate_measured_system(&spec, &rho0, meta.seed)?;
    let filtered = qfilter::run_unnormalized_filter(&spec, &signal, &pi0)?;
    let alpha = qfilter::stratonovich_alpha(&spec, &signal)?;

    let n = spec.dim();
    let mut columns = vec!["t".to_string()];
    columns.extend(entry_columns("pi_", n));
    columns.extend(["trace_pi".to_string(), "dy".to_string()]);
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let extra = [
        ("homodyne_angle", format_float(f.homodyne_angle)),
        ("dt", format_float(f.dt)),
    ];
    let mut traj = CsvDoc::new(meta, &extra, &columns);
    for (k, pi) in filtered.iter().enumerate() {
        let mut cells = vec![Cell::Float(k as f64 * spec.dt())];
        push_entries(&mut cells, pi);
        cells.push(pi.trace().re.into());
        cells.push(signal.dy.get(k).map_or(Cell::Empty, |&dy| dy.into()));
        traj.row(&cells);
    }

    let mut alpha_doc = CsvDoc::new(
        meta,
        &extra,
        &["t", "alpha_dt_term", "alpha_signal_term", "alpha_total", "cumulative"],
    );
    let mut cumulative = 0.0;
    for (k, step) in alpha.steps.iter().enumerate() {
        cumulative += step.total;
        alpha_doc.row(&[
            (k as f64 * spec.dt()).into(),
            step.dt_term.into(),
            step.signal_term.into(),
            step.total.into(),
            cumulative.into(),
        ]);
    }
    let summary = vec![
        format!("positive alpha steps: {}", alpha.positive_fraction()),
        format!("max signal-term norm: {:e}", alpha.max_signal_term_norm()),
        format!("cumulative alpha: {}", alpha.cumulative),
        format!("gauge condition residual: {:e}", spec.gauge_condition_residual()),
    ];
    for line in &summary {
        alpha_doc.comment(line);
    }
    Ok(Outputs {
        passed: true,
        files: vec![
            ("filter_trajectory.csv".into(), traj),
            ("filter_alpha.csv".into(), alpha_doc),
        ],
        summary,
    })
}

fn evolve(cfg: &RunConfig, meta: &Provenance) -> Result<Outputs, CliError> {
    let b = block(&cfg.evolve, "evolve")?;
    let tlme = cfg.model()?.resolve()?.tlme()?;
    let rho0 = initial_state(&b.initial_state, tlme.dim())?;
    let grid = TimeGrid::new(0.0, b.t1, b.dt, b.sample_stride)?;
    let (label, states) = match b.scheme {
        EvolveScheme::Direct => ("direct", dynamics::evolve_rk4(&tlme, &rho0, &grid)?),
        EvolveScheme::Diagonal | EvolveScheme::OffDiagonal => {
            let scheme = if b.scheme == EvolveScheme::Diagonal {
                SchemeName::Diagonal
            } else {
                SchemeName::OffDiagonal
            };
            let ms = build_scheme(scheme, &tlme)?;
            let embedded = mapping::initial_embedding(&ms, &rho0)?;
            let states = dynamics::evolve_rk4(&ms.lindblad, &embedded, &grid)?
                .into_iter()
                .map(|(t, rho)| Ok((t, mapping::recover_state(&ms, &rho, t)?)))
                .collect::<tlme_core::Result<Vec<_>>>()?;
            (scheme_label(scheme), states)
        }
    };
    let n = tlme.dim();
    let mut columns = vec!["t".to_string(), "trace_re".to_string(), "trace_im".to_string()];
    columns.extend(entry_columns("", n));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut doc = CsvDoc::new(meta, &[("scheme", label.to_string())], &columns);
    for (t, rho) in &states {
        let tr = rho.trace();
        let mut cells = vec![Cell::Float(*t), tr.re.into(), tr.im.into()];
        push_entries(&mut cells, rho);
        doc.row(&cells);
    }
    let last = states.last().map(|(_, r)| r.trace().re).unwrap_or(f64::NAN);
    Ok(Outputs {
        passed: true,
        files: vec![("evolve.csv".into(), doc)],
        summary: vec![format!("{label}: final trace {last}")],
    })
}
