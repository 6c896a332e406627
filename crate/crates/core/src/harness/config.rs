//! Run configuration and dispersion settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{EntryState, IntegratorConfig, LongitudinalState};
use crate::environment::{AtmosphereDispersion, AtmosphereModel, PlanetModel};
use crate::error::{Error, Result};
use crate::guidance::{Algorithm, GuidanceConfig, GuidanceModels};
use crate::orbit::{from_inertial, TargetOrbit};
use crate::vehicle::{AeroModel, VehicleParams};

/// Entry interface conditions. Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryConditions {
    /// Altitude above the equatorial radius, m.
    pub altitude: f64,
    /// m/s
    pub velocity: f64,
    pub efpa_deg: f64,
    pub longitude_deg: f64,
    pub latitude_deg: f64,
    pub azimuth_deg: f64,
    /// Velocity, flight-path angle and azimuth are inertial and get
    /// converted to planet-relative values.
    #[serde(default = "yes")]
    pub inertial: bool,
}

fn yes() -> bool {
    true
}

impl EntryConditions {
    /// Uranus arrival: 23.78 km/s inertial at 1,000 km, EFPA -10.8 deg.
    pub fn uranus_nominal() -> Self {
        Self {
            altitude: 1_000e3,
            velocity: 23_780.0,
            efpa_deg: -10.8,
            longitude_deg: 262.12,
            latitude_deg: -16.02,
            azimuth_deg: 117.45,
            inertial: true,
        }
    }

    pub fn with_efpa(&self, efpa_deg: f64) -> Self {
        Self { efpa_deg, ..*self }
    }

    /// Planet-relative state at `t = 0`.
    pub fn to_state(&self, planet: &PlanetModel) -> EntryState {
        let r = planet.r_eq + self.altitude;
        let phi = self.latitude_deg.to_radians();
        let (gamma, psi) = (self.efpa_deg.to_radians(), self.azimuth_deg.to_radians());
        let (v, gamma, psi) = if self.inertial {
            from_inertial(self.velocity, gamma, psi, r, phi, planet)
        } else {
            (self.velocity, gamma, psi.rem_euclid(std::f64::consts::TAU))
        };
        EntryState { r, theta: self.longitude_deg.to_radians(), phi, v, gamma, psi, t: 0.0 }
    }
}

/// Per-run dispersions. Sigmas are 1-sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionSpec {
    /// deg
    pub efpa_sigma: f64,
    pub atm: AtmosphereDispersion,
    /// Fraction of nominal mass.
    pub mass_sigma: f64,
    /// Fraction, applied independently to the C_L and C_D multipliers.
    pub aero_scale_sigma: f64,
}

impl DispersionSpec {
    pub fn none() -> Self {
        Self { efpa_sigma: 0.0, atm: AtmosphereDispersion::default(), mass_sigma: 0.0, aero_scale_sigma: 0.0 }
    }

    fn with_efpa_3sigma(three_sigma: f64) -> Self {
        Self {
            efpa_sigma: three_sigma / 3.0,
            atm: AtmosphereDispersion {
                scale_sigma: 0.05,
                corr_altitude: 40e3,
                perturb_sigma: 0.05,
                ..AtmosphereDispersion::default()
            },
            mass_sigma: 0.01,
            aero_scale_sigma: 0.03,
        }
    }

    /// EFPA +-0.189 deg 3-sigma.
    pub fn baseline() -> Self {
        Self::with_efpa_3sigma(0.189)
    }

    /// EFPA +-0.622 deg 3-sigma.
    pub fn conservative() -> Self {
        Self::with_efpa_3sigma(0.622)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.efpa_sigma, self.mass_sigma, self.aero_scale_sigma].iter().all(|s| *s >= 0.0 && s.is_finite());
        if !ok {
            return Err(Error::InvalidConfig(format!("dispersions must be non-negative: {self:?}")));
        }
        if self.mass_sigma >= 0.2 || self.aero_scale_sigma >= 0.2 {
            return Err(Error::InvalidConfig("mass and aero sigmas must stay below 0.2".into()));
        }
        self.atm.validate()
    }
}

/// Everything needed to fly one or many passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub planet: PlanetModel,
    /// Nominal atmosphere. Truth is drawn around it; guidance always uses it.
    pub atmosphere: AtmosphereModel,
    /// Truth vehicle.
    pub vehicle: VehicleParams,
    /// Linear aero carried by guidance. Fitted to the truth table over the
    /// angle-of-attack bounds when absent.
    #[serde(default)]
    pub guidance_aero: Option<AeroModel>,
    pub integrator: IntegratorConfig,
    pub guidance: GuidanceConfig,
    pub entry: EntryConditions,
    pub target: TargetOrbit,
    pub dispersions: DispersionSpec,
    pub n_runs: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Truth impact altitude, m.
    #[serde(default = "default_impact_altitude")]
    pub impact_altitude: f64,
    /// s
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
}

fn one() -> usize {
    1
}
fn default_impact_altitude() -> f64 {
    50e3
}
fn default_time_limit() -> f64 {
    3_000.0
}

impl RunConfig {
    /// Uranus aerocapture with the default probe, baseline dispersions and
    /// 500 runs.
    pub fn uranus_default() -> Self {
        let planet = PlanetModel::uranus();
        let target = TargetOrbit::uranus_default(&planet);
        Self {
            planet,
            atmosphere: AtmosphereModel::uranus_nominal(),
            vehicle: VehicleParams::default_probe(),
            guidance_aero: None,
            integrator: IntegratorConfig::truth_default(),
            guidance: GuidanceConfig::default(),
            entry: EntryConditions::uranus_nominal(),
            target,
            dispersions: DispersionSpec::baseline(),
            n_runs: 500,
            seed: 1,
            workers: 1,
            output_dir: None,
            impact_altitude: default_impact_altitude(),
            time_limit: default_time_limit(),
        }
    }

    /// Simplified environment matching the reference optimizer's model:
    /// non-rotating planet, linear aero truth and no dispersions.
    pub fn desk() -> Result<Self> {
        let mut cfg = Self::uranus_default();
        cfg.planet = cfg.planet.non_rotating();
        cfg.vehicle = cfg.vehicle.with_aero(cfg.onboard_aero()?);
        cfg.dispersions = DispersionSpec::none();
        Ok(cfg)
    }

    /// Longitudinal entry state for the reference optimizer.
    pub fn oracle_entry(&self) -> LongitudinalState {
        self.entry.to_state(&self.planet).longitudinal()
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.guidance.algorithm = algorithm;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.planet.validate()?;
        self.atmosphere.validate()?;
        self.vehicle.validate()?;
        if let Some(a) = &self.guidance_aero {
            self.vehicle.with_aero(a.clone()).validate()?;
        }
        self.integrator.validate()?;
        self.guidance.validate()?;
        self.target.validate(&self.planet)?;
        self.dispersions.validate()?;
        let e = &self.entry;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(e.velocity > 0.0 && e.efpa_deg < 0.0 && e.efpa_deg > -90.0 && e.latitude_deg.abs() < 90.0) {
            return bad("entry: need v > 0, -90 < efpa < 0 and |latitude| < 90");
        }
        if (self.planet.r_eq + e.altitude - self.planet.r_atm).abs() > 1.0 {
            return bad("entry altitude must sit on the atmospheric interface");
        }
        if self.n_runs == 0 || self.workers == 0 {
            return bad("n_runs and workers must be at least 1");
        }
        if !(self.impact_altitude >= self.atmosphere.h_min && self.time_limit > 0.0) {
            return bad("impact altitude must lie inside the atmosphere model and time_limit > 0");
        }
        Ok(())
    }

    /// Linear aero used on board.
    pub fn onboard_aero(&self) -> Result<AeroModel> {
        match (&self.guidance_aero, &self.vehicle.aero) {
            (Some(a), _) => Ok(a.clone()),
            (None, AeroModel::Linear { .. }) => Ok(self.vehicle.aero.clone()),
            (None, table) => {
                let fit = crate::vehicle::fit_linear(table, (self.vehicle.alpha_min, self.vehicle.alpha_max))?;
                if let Some(w) = &fit.warning {
                    log::warn!("{w}");
                }
                Ok(fit.model)
            }
        }
    }

    /// What the flight computer believes: nominal planet, atmosphere and
    /// mass with the linear aero.
    pub fn guidance_models(&self) -> Result<GuidanceModels> {
        Ok(GuidanceModels {
            planet: self.planet.clone(),
            atm: self.atmosphere.clone(),
            veh: self.vehicle.with_aero(self.onboard_aero()?),
            target: self.target,
        })
    }
}
