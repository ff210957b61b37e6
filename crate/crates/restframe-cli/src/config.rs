//! Run configuration and the states built from it.
//!
//! The file is TOML: top-level keys plus dotted sections. Paths inside it are
//! resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use restframe::canonical_transform::{ChargeModel, Frame, ParticleInit, PhaseSpaceState};
use restframe::radiation::{GridSpec, ModeGrid, RadiationState};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{path}: {message}")]
    ModeFile { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeKind {
    #[default]
    Nilpotent,
    Commuting,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub mass: f64,
    pub charge: f64,
    pub eta: [f64; 3],
    pub kappa: [f64; 3],
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub n_radial: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiationConfig {
    /// Mode-state file; takes precedence over `[grid]` and `amplitude`.
    pub modes: Option<PathBuf>,
    /// Half-width of the seeded uniform draw for each `Re a`, `Im a`.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub tau_span: f64,
    pub samples: usize,
    /// Put the initial state on the rest-frame constraint surface first.
    pub project: bool,
    pub min_separation: Option<f64>,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { dt: 0.01, tau_span: 1.0, samples: 100, project: false, min_separation: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub c_values: Vec<f64>,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self { c_values: vec![8.0, 16.0, 32.0, 64.0] }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    pub tau: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub energy_drift: f64,
    pub constraint: f64,
    pub decompose: f64,
    pub canonicity: f64,
    pub cross_terms: f64,
    pub frame_equivalence: f64,
    pub wave_equation: f64,
    pub tetrad: f64,
    pub grassmann: f64,
    pub nr_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            energy_drift: 1e-8,
            constraint: 1e-8,
            decompose: 1e-8,
            canonicity: 1e-8,
            cross_terms: 1e-8,
            frame_equivalence: 1e-7,
            wave_equation: 1e-12,
            tetrad: 1e-12,
            grassmann: 1e-12,
            nr_order: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub charges: ChargeKind,
    #[serde(default)]
    pub particles: Vec<ParticleConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub radiation: RadiationConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A validated configuration together with its radiation state.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub radiation: RadiationState,
}

impl Setup {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source: Box::new(source) })?;
        if let Some(m) = &config.radiation.modes {
            if m.is_relative() {
                config.radiation.modes = Some(path.parent().unwrap_or(Path::new(".")).join(m));
            }
        }
        config.validate()?;
        let radiation = config.radiation_state()?;
        Ok(Self { config, radiation })
    }

    pub fn charges(&self) -> Vec<f64> {
        self.config.particles.iter().map(|p| p.charge).collect()
    }

    pub fn particles(&self) -> Vec<ParticleInit> {
        self.config
            .particles
            .iter()
            .map(|p| ParticleInit { eta: Vector3::from(p.eta), kappa: Vector3::from(p.kappa), mass: p.mass })
            .collect()
    }

    pub fn charge_model(&self, force_commuting: bool) -> ChargeModel {
        if force_commuting || self.config.charges == ChargeKind::Commuting {
            ChargeModel::Commuting(self.charges())
        } else {
            ChargeModel::Nilpotent
        }
    }

    pub fn state(&self, frame: Frame, force_commuting: bool) -> anyhow::Result<PhaseSpaceState> {
        Ok(PhaseSpaceState::new(
            &self.particles(),
            &self.radiation,
            self.charge_model(force_commuting),
            self.config.c,
            frame,
        )?)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        for (i, p) in self.particles.iter().enumerate() {
            if !(p.mass > 0.0 && p.mass.is_finite()) {
                return bad(format!("particle {} has mass {}", i + 1, p.mass));
            }
            if !p.eta.iter().chain(&p.kappa).chain([&p.charge]).all(|v| v.is_finite()) {
                return bad(format!("particle {} has a non-finite entry", i + 1));
            }
            for (j, q) in self.particles.iter().enumerate().skip(i + 1) {
                if p.eta == q.eta {
                    return bad(format!("particles {} and {} coincide", i + 1, j + 1));
                }
            }
        }
        if self.particles.len() > 31 {
            return bad(format!("at most 31 particles, got {}", self.particles.len()));
        }
        let it = &self.integration;
        if !(it.dt > 0.0 && it.dt.is_finite() && it.tau_span >= 0.0 && it.tau_span.is_finite()) {
            return bad(format!("integration needs dt > 0 and tau_span ≥ 0 (dt = {}, tau_span = {})", it.dt, it.tau_span));
        }
        if it.samples == 0 {
            return bad("integration.samples must be at least 1".into());
        }
        if self.limits.c_values.iter().any(|c| !(*c > 0.0)) {
            return bad("limits.c_values must be positive".into());
        }
        if !(self.radiation.amplitude >= 0.0) {
            return bad(format!("radiation.amplitude must be non-negative, got {}", self.radiation.amplitude));
        }
        Ok(())
    }

    fn radiation_state(&self) -> Result<RadiationState, ConfigError> {
        if let Some(path) = &self.radiation.modes {
            return read_modes(path);
        }
        let grid = match self.grid {
            Some(g) => ModeGrid::spherical(GridSpec {
                k_min: g.k_min,
                k_max: g.k_max,
                n_radial: g.n_radial,
                n_polar: g.n_polar,
                n_azimuth: g.n_azimuth,
            }),
            None => ModeGrid::from_nodes(&[]),
        }
        .map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?;
        let grid = Arc::new(grid);
        let a = self.radiation.amplitude;
        if a == 0.0 {
            return Ok(RadiationState::zero(grid));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let amps = (0..grid.len())
            .map(|_| [0, 1].map(|_| Complex64::new(rng.random_range(-a..=a), rng.random_range(-a..=a))))
            .collect();
        RadiationState::new(grid, amps).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Reads rows `kx, ky, kz, weight, Re a₁, Im a₁, Re a₂, Im a₂`; `#` starts a
/// comment line.
pub fn read_modes(path: &Path) -> Result<RadiationState, ConfigError> {
    let err = |message: String| ConfigError::ModeFile { path: path.into(), message };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut points = vec![];
    let mut amps = vec![];
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| err(format!("line {line_no}: {e}"))))
            .collect::<Result<_, _>>()?;
        if v.len() != 8 {
            return Err(err(format!("line {line_no}: expected 8 columns, got {}", v.len())));
        }
        points.push((Vector3::new(v[0], v[1], v[2]), v[3]));
        amps.push([Complex64::new(v[4], v[5]), Complex64::new(v[6], v[7])]);
    }
    let grid = ModeGrid::from_nodes(&points).map_err(|e| err(e.to_string()))?;
    RadiationState::new(Arc::new(grid), amps).map_err(|e| err(e.to_string()))
}
