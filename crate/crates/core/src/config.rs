//! Run configuration loaded from a directory of TOML files.
//!
//! Each of `planet.toml`, `aero.toml`, `vehicle.toml`, `mission.toml`,
//! `guidance.toml`, `plant.toml` and `dispersion.toml` is optional; a missing
//! file keeps the nominal Uranus orbiter values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::aero::{AeroError, AeroModel, VehicleError, VehicleModel};
use crate::dynamics::ModelBundle;
use crate::guidance::GuidanceConfig;
use crate::mission::Mission;
use crate::montecarlo::{DispersionSpec, McError};
use crate::orbits::OrbitError;
use crate::planet::{PlanetError, PlanetModel};
use crate::sim::{PlantConfig, RunSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("serializing {0}: {1}")]
    Serialize(&'static str, toml::ser::Error),
    #[error(transparent)]
    Planet(#[from] PlanetError),
    #[error(transparent)]
    Aero(#[from] AeroError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Dispersion(#[from] McError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub planet: PlanetModel,
    pub aero: AeroModel,
    pub vehicle: VehicleModel,
    pub mission: Mission,
    pub guidance: GuidanceConfig,
    pub plant: PlantConfig,
    /// Campaign dispersions; `None` leaves the choice to the caller.
    pub dispersion: Option<DispersionSpec>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            planet: PlanetModel::uranus(),
            aero: AeroModel::quadratic(),
            vehicle: VehicleModel::uop(),
            mission: Mission::uranus_orbiter(),
            guidance: GuidanceConfig::default(),
            plant: PlantConfig::default(),
            dispersion: None,
        }
    }
}

fn read_opt<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Option<T>, ConfigError> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
    toml::from_str(&text).map(Some).map_err(|source| ConfigError::Parse { path, source })
}

fn write_one<T: Serialize>(dir: &Path, name: &'static str, value: &T) -> Result<(), ConfigError> {
    let text = toml::to_string_pretty(value).map_err(|e| ConfigError::Serialize(name, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| ConfigError::Read { path, source })
}

impl Manifest {
    pub fn load_dir(dir: &Path) -> Result<Self, ConfigError> {
        if !dir.is_dir() {
            return Err(ConfigError::MissingDir(dir.to_path_buf()));
        }
        let d = Self::default();
        let m = Self {
            planet: read_opt(dir, "planet.toml")?.unwrap_or(d.planet),
            aero: read_opt(dir, "aero.toml")?.unwrap_or(d.aero),
            vehicle: read_opt(dir, "vehicle.toml")?.unwrap_or(d.vehicle),
            mission: read_opt(dir, "mission.toml")?.unwrap_or(d.mission),
            guidance: read_opt(dir, "guidance.toml")?.unwrap_or(d.guidance),
            plant: read_opt(dir, "plant.toml")?.unwrap_or(d.plant),
            dispersion: read_opt(dir, "dispersion.toml")?,
        };
        m.validate()?;
        Ok(m)
    }

    /// Write every section, so the directory reloads to `self`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), ConfigError> {
        fs::create_dir_all(dir).map_err(|source| ConfigError::Read { path: dir.to_path_buf(), source })?;
        write_one(dir, "planet.toml", &self.planet)?;
        write_one(dir, "aero.toml", &self.aero)?;
        write_one(dir, "vehicle.toml", &self.vehicle)?;
        write_one(dir, "mission.toml", &self.mission)?;
        write_one(dir, "guidance.toml", &self.guidance)?;
        write_one(dir, "plant.toml", &self.plant)?;
        if let Some(d) = &self.dispersion {
            write_one(dir, "dispersion.toml", d)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.planet.validate()?;
        self.vehicle.validate()?;
        let (lo, hi) = self.vehicle.alpha_limits;
        self.aero.validate(lo, hi)?;
        self.mission.target(&self.planet)?;
        if let Some(d) = &self.dispersion {
            d.validate()?;
        }
        let g = &self.guidance;
        if !(g.rate_hz > 0.0 && g.rate_hz.is_finite()) {
            return Err(ConfigError::Invalid(format!("guidance rate must be positive, got {}", g.rate_hz)));
        }
        if !(self.plant.dt > 0.0 && self.plant.t_max > 0.0) {
            return Err(ConfigError::Invalid("plant step and time limit must be positive".into()));
        }
        Ok(())
    }

    pub fn models(&self) -> ModelBundle {
        ModelBundle { planet: self.planet.clone(), aero: self.aero.clone(), vehicle: self.vehicle }
    }

    /// The undispersed run at the mission's nominal entry.
    pub fn run_spec(&self) -> RunSpec {
        let mut spec = RunSpec::nominal(self.mission, self.models(), self.guidance);
        spec.plant = self.plant;
        spec
    }
}
