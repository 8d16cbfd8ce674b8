//! JSON run configuration.
//!
//! Complex matrices are written as row lists of `[re, im]` pairs. Shapes are
//! checked when a matrix is converted, so a ragged row is reported with its
//! index rather than as a generic deserialization failure.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tlme_core::{ComplexMatrix, C64};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Complex matrix as it appears in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<[f64; 2]>>);

impl MatrixSpec {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self(
            (0..m.rows())
                .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        )
    }

    /// Converts to a square matrix; `what` names the field in errors.
    pub fn to_matrix(&self, what: &str) -> Result<ComplexMatrix, CliError> {
        let n = self.0.len();
        if n == 0 {
            return Err(CliError::ConfigParse(format!("{what}: matrix has no rows")));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in self.0.iter().enumerate() {
            if row.len() != n {
                return Err(CliError::ConfigParse(format!(
                    "{what}: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|&[re, im]| C64::new(re, im)));
        }
        ComplexMatrix::from_vec(n, n, data).map_err(|e| CliError::ConfigParse(format!("{what}: {e}")))
    }
}

fn matrices(specs: &[MatrixSpec], what: &str) -> Result<Vec<ComplexMatrix>, CliError> {
    specs
        .iter()
        .enumerate()
        .map(|(k, m)| m.to_matrix(&format!("{what}[{k}]")))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// A plain Lindbladian.
    Lindblad {
        hamiltonian: MatrixSpec,
        jumps: Vec<MatrixSpec>,
    },
    /// The counting-field tilt of a Lindbladian.
    Tilted {
        hamiltonian: MatrixSpec,
        jumps: Vec<MatrixSpec>,
        channel: usize,
        s: f64,
    },
    /// A general time-local master equation.
    Tlme {
        hamiltonian: MatrixSpec,
        #[serde(default)]
        jumps: Vec<MatrixSpec>,
        b: MatrixSpec,
        c: MatrixSpec,
        #[serde(default)]
        d: Vec<MatrixSpec>,
        #[serde(default)]
        e: Vec<MatrixSpec>,
    },
    Micromaser {
        fock_dim: usize,
        pump_rate: f64,
        rabi_angle: f64,
        thermal_occupancy: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Diagonal,
    OffDiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolveScheme {
    Direct,
    Diagonal,
    OffDiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Growth,
    PopulationGrowth,
    Coherence,
    CoherenceMc,
}

impl MethodName {
    pub fn label(self) -> &'static str {
        match self {
            Self::Growth => "growth",
            Self::PopulationGrowth => "population_growth",
            Self::Coherence => "coherence",
            Self::CoherenceMc => "coherence_mc",
        }
    }
}

fn default_map_t() -> f64 {
    1.0
}
fn default_map_dt() -> f64 {
    1e-4
}
fn default_map_tol() -> f64 {
    1e-7
}
fn default_stride() -> usize {
    10
}
fn default_growth_tol() -> f64 {
    1e-8
}
fn default_renorm() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapCheckConfig {
    #[serde(default = "default_map_t")]
    pub t: f64,
    #[serde(default = "default_map_dt")]
    pub dt: f64,
    #[serde(default = "default_map_tol")]
    pub tolerance: f64,
    /// Schemes to check; all applicable ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<SchemeName>>,
    /// Maximally mixed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<MatrixSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSweepConfig {
    pub s_values: Vec<f64>,
    pub method: MethodName,
    /// Counted jump channel of a Lindblad model.
    #[serde(default)]
    pub channel: usize,
    pub t1: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default = "default_growth_tol")]
    pub tolerance: f64,
    #[serde(default = "default_renorm")]
    pub renorm_interval: usize,
    /// Required by `coherence_mc`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Counting field for Lindblad and micromaser models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default)]
    pub channel: usize,
    /// Embedding used for tilted and TLME models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    pub n_traj: usize,
    pub t1: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<MatrixSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub hamiltonian: MatrixSpec,
    pub coupling: MatrixSpec,
    #[serde(default)]
    pub homodyne_angle: f64,
    pub dt: f64,
    pub duration: f64,
    pub initial_state: MatrixSpec,
    /// Filter start; the true initial state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_initial_state: Option<MatrixSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub t1: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    pub scheme: EvolveScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<MatrixSpec>,
}

/// Top-level config. Each command reads the model and its own block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_check: Option<MapCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_sweep: Option<ThetaSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::ConfigParse(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, so formatting changes to the
    /// file do not change the hash.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no model block".into()))
    }
}

pub(crate) fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    b.as_ref()
        .ok_or_else(|| CliError::Config(format!("config has no {name} block")))
}

/// A model resolved into core types.
pub enum Model {
    Lindblad(tlme_core::LindbladSpec),
    Tilted {
        base: tlme_core::LindbladSpec,
        channel: usize,
        s: f64,
    },
    Tlme(tlme_core::TlmeSpec),
    Micromaser(tlme_core::trajstats::MicromaserSpec),
}

impl ModelConfig {
    pub fn resolve(&self) -> Result<Model, CliError> {
        let lindblad = |h: &MatrixSpec, jumps: &[MatrixSpec]| -> Result<_, CliError> {
            Ok(tlme_core::LindbladSpec::new(
                h.to_matrix("hamiltonian")?,
                matrices(jumps, "jumps")?,
            )?)
        };
        Ok(match self {
            Self::Lindblad { hamiltonian, jumps } => Model::Lindblad(lindblad(hamiltonian, jumps)?),
            Self::Tilted {
                hamiltonian,
                jumps,
                channel,
                s,
            } => {
                let base = lindblad(hamiltonian, jumps)?;
                // Validates the channel index and s.
                tlme_core::model::tilted_generator(&base, *channel, *s)?;
                Model::Tilted {
                    base,
                    channel: *channel,
                    s: *s,
                }
            }
            Self::Tlme {
                hamiltonian,
                jumps,
                b,
                c,
                d,
                e,
            } => Model::Tlme(tlme_core::TlmeSpec::new(
                lindblad(hamiltonian, jumps)?,
                b.to_matrix("b")?,
                c.to_matrix("c")?,
                matrices(d, "d")?,
                matrices(e, "e")?,
            )?),
            Self::Micromaser {
                fock_dim,
                pump_rate,
                rabi_angle,
                thermal_occupancy,
            } => {
                let spec = tlme_core::trajstats::MicromaserSpec {
                    fock_dim: *fock_dim,
                    pump_rate: *pump_rate,
                    rabi_angle: *rabi_angle,
                    thermal_occupancy: *thermal_occupancy,
                };
                spec.validate()?;
                Model::Micromaser(spec)
            }
        })
    }
}

impl Model {
    /// The TLME of models that define one.
    pub fn tlme(&self) -> Result<tlme_core::TlmeSpec, CliError> {
        match self {
            Self::Lindblad(l) => Ok(tlme_core::TlmeSpec::from_lindblad(l.clone())),
            Self::Tilted { base, channel, s } => {
                Ok(tlme_core::model::tilted_generator(base, *channel, *s)?)
            }
            Self::Tlme(t) => Ok(t.clone()),
            Self::Micromaser(_) => Err(CliError::Config(
                "micromaser model defines no TLME without a counting field; use a tilted model".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lindblad(l) => l.dim(),
            Self::Tilted { base, .. } => base.dim(),
            Self::Tlme(t) => t.dim(),
            Self::Micromaser(m) => m.fock_dim,
        }
    }
}

/// `initial_state`, or the maximally mixed state of dimension `n`.
pub(crate) fn initial_state(spec: &Option<MatrixSpec>, n: usize) -> Result<ComplexMatrix, CliError> {
    match spec {
        Some(m) => {
            let rho = m.to_matrix("initial_state")?;
            if rho.rows() != n {
                return Err(CliError::Config(format!(
                    "initial_state has dimension {}, model has {n}",
                    rho.rows()
                )));
            }
            Ok(rho)
        }
        None => Ok(ComplexMatrix::identity(n).scale_real(1.0 / n as f64)),
    }
}
