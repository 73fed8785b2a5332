//! Run configuration: a single JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rotbec::dm::DmOptions;
use rotbec::gp::GpOptions;
use rotbec::io::read_field_text;
use rotbec::{Grid64, ModelSpec64, RotationSpec, Trap64};

use crate::CliError;

/// One value per axis, or a single value for all axes.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum PerAxis {
    Same(f64),
    Each(Vec<f64>),
}

impl PerAxis {
    pub fn expand(&self, dim: usize, what: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerAxis::Same(x) => Ok(vec![*x; dim]),
            PerAxis::Each(v) if v.len() == dim => Ok(v.clone()),
            PerAxis::Each(v) => Err(CliError::Config(format!("{what} has {} entries for dim {dim}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrapConfig {
    Harmonic {
        nu: PerAxis,
    },
    Quartic {
        nu: PerAxis,
        lambda: f64,
    },
    /// Real part of a text field dump on the run grid.
    Sampled {
        path: PathBuf,
        #[serde(default)]
        margin: f64,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub half_width: PerAxis,
    pub points: usize,
    pub trap: TrapConfig,
    /// Full angular velocity vector; exclusive with `omega_z`.
    #[serde(default)]
    pub omega: Option<[f64; 3]>,
    #[serde(default)]
    pub omega_z: Option<f64>,
    #[serde(default)]
    pub g: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub windings: Vec<u32>,
    /// Density-matrix ranks visited in order, each warm-started from the
    /// previous one.
    pub dm_ranks: Vec<usize>,
    pub dm_tol: f64,
    pub dm_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let gp = GpOptions::default();
        let dm = DmOptions::default();
        Self {
            tol: gp.tol,
            max_iter: gp.max_iter,
            restarts: gp.restarts,
            seed: gp.seed,
            windings: gp.windings,
            dm_ranks: vec![2, 4],
            dm_tol: dm.tol,
            dm_max_iter: dm.max_iter,
        }
    }
}

impl SolverConfig {
    pub fn gp_options(&self) -> GpOptions {
        GpOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed: self.seed,
            windings: self.windings.clone(),
        }
    }

    pub fn dm_options(&self) -> DmOptions {
        DmOptions {
            tol: self.dm_tol,
            max_iter: self.dm_max_iter,
            restarts: 0,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    G,
    OmegaZ,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairConfig {
    Delta,
    /// Gaussian base potential of the given width rescaled to unit
    /// scattering length.
    Gaussian { width: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    pub modes: usize,
    pub particles: Vec<usize>,
    /// Defaults to `model.g`.
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default = "default_pair")]
    pub pair: PairConfig,
    #[serde(default)]
    pub absolute: bool,
}

fn default_pair() -> PairConfig {
    PairConfig::Delta
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentConfig {
    pub truncation: usize,
    pub z: [f64; 2],
    pub radius: f64,
    pub n_max: usize,
    pub radial: usize,
    pub angular: usize,
}

impl Default for CoherentConfig {
    fn default() -> Self {
        Self {
            truncation: 64,
            z: [1.0, 1.0],
            radius: 8.0,
            n_max: 8,
            radial: 128,
            angular: 256,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    HardSphere { radius: f64 },
    SquareWell { depth: f64, radius: f64 },
    Gaussian { amplitude: f64, width: f64 },
    SoftShell { inner: f64, outer: f64 },
}

impl PotentialConfig {
    pub fn build(&self) -> rotbec::RadialPotential64 {
        use rotbec::scatter::RadialPotential as R;
        match *self {
            PotentialConfig::HardSphere { radius } => R::HardSphere { radius },
            PotentialConfig::SquareWell { depth, radius } => R::SquareWell { depth, radius },
            PotentialConfig::Gaussian { amplitude, width } => R::Gaussian { amplitude, width },
            PotentialConfig::SoftShell { inner, outer } => R::soft_shell(inner, outer),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PotentialConfig::HardSphere { .. } => "hard_sphere",
            PotentialConfig::SquareWell { .. } => "square_well",
            PotentialConfig::Gaussian { .. } => "gaussian",
            PotentialConfig::SoftShell { .. } => "soft_shell",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BornConfig {
    pub inner: f64,
    pub outer: f64,
    pub a: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    #[serde(default)]
    pub potentials: Vec<PotentialConfig>,
    #[serde(default)]
    pub scales: Vec<f64>,
    #[serde(default)]
    pub born: Option<BornConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_fields: bool,
    pub emit_images: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            emit_fields: false,
            emit_images: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub fock: Option<FockConfig>,
    #[serde(default)]
    pub coherent: Option<CoherentConfig>,
    #[serde(default)]
    pub scatter: Option<ScatterConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// Parsed configuration with the facts every output records.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    /// First 16 hex digits of the SHA-256 of the configuration bytes.
    pub hash: String,
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
}

impl Loaded {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_bytes(&bytes, base)
    }

    pub fn from_bytes(bytes: &[u8], base: PathBuf) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
        let digest = Sha256::digest(bytes);
        let hash = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Ok(Self { config, hash, base })
    }

    pub fn seed(&self) -> u64 {
        self.config.solver.seed
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.outputs.directory)
    }

    /// Model with optional overrides of `g` and `Ω_z`; not yet checked for
    /// stability.
    pub fn spec_with(&self, g: Option<f64>, omega_z: Option<f64>) -> Result<ModelSpec64, CliError> {
        let m = &self.config.model;
        if m.dim != 2 && m.dim != 3 {
            return Err(CliError::Config(format!("dim must be 2 or 3, got {}", m.dim)));
        }
        let half = m.half_width.expand(m.dim, "half_width")?;
        let grid: Arc<Grid64> = Grid64::new(&half, &vec![m.points; m.dim])
            .map_err(|e| CliError::Config(e.to_string()))?
            .shared();
        let trap = match &m.trap {
            TrapConfig::Harmonic { nu } => Trap64::Harmonic {
                nu: nu.expand(m.dim, "nu")?,
            },
            TrapConfig::Quartic { nu, lambda } => Trap64::Quartic {
                nu: nu.expand(m.dim, "nu")?,
                lambda: *lambda,
            },
            TrapConfig::Sampled { path, .. } => {
                let f: rotbec::Field64 =
                    read_field_text(&self.resolve(path)).map_err(|e| CliError::Config(format!("sampled trap: {e}")))?;
                if **f.grid() != *grid {
                    return Err(CliError::Config("sampled trap grid differs from the model grid".into()));
                }
                Trap64::Sampled {
                    values: f.values().iter().map(|v| v.re).collect(),
                }
            }
        };
        let omega = match (m.omega, m.omega_z) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either omega or omega_z, not both".into())),
            (Some(w), None) => w,
            (None, z) => [0.0, 0.0, z.unwrap_or(0.0)],
        };
        let omega = match omega_z {
            Some(z) => [omega[0], omega[1], z],
            None => omega,
        };
        let g = g.unwrap_or(m.g);
        let mut spec = ModelSpec64::new(grid, trap, RotationSpec { omega }, g).map_err(CliError::from_model)?;
        if let TrapConfig::Sampled { margin, .. } = &m.trap {
            spec = spec.with_stability_margin(*margin);
        }
        Ok(spec)
    }

    pub fn spec(&self) -> Result<ModelSpec64, CliError> {
        self.spec_with(None, None)
    }
}
