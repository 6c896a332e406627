//! Onboard trajectory predictor: full rotating-planet dynamics with the
//! linear aerodynamic model and the nominal density scaled by the filter
//! ratio, integrated with fixed-step RK4.

use serde::{Deserialize, Serialize};

use crate::dynamics::{full_rates_with_bank, rk4_step, ControlCommand, EntryState};
use crate::environment::{AtmosphereModel, DensityEval, PlanetModel};
use crate::error::{Error, Result};
use crate::orbit::{apoapsis_radius, to_inertial, TargetOrbit};
use crate::profiles::{BangBangProfile, SwitchingSchedule};
use crate::vehicle::VehicleParams;

/// Guidance-side models: what the flight computer believes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceModels {
    pub planet: PlanetModel,
    pub atm: AtmosphereModel,
    /// Vehicle with the linear aerodynamic model.
    pub veh: VehicleParams,
    pub target: TargetOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// RK4 step, s.
    pub dt: f64,
    /// Prediction horizon from the current time, s.
    pub horizon: f64,
    /// Climbing with less aerodynamic acceleration than this (m/s^2) counts
    /// as having left the atmosphere.
    pub quiet_accel: f64,
    /// Hyperbolic and very large apoapses are reported as this multiple of
    /// the target apoapsis.
    pub sentinel_factor: f64,
    /// Altitude below which the pass counts as an impact, m.
    pub floor_altitude: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { dt: 1.0, horizon: 2_500.0, quiet_accel: 1e-3, sentinel_factor: 10.0, floor_altitude: 50e3 }
    }
}

/// Command source for a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileMode {
    /// Bang-bang profile from the schedule.
    Schedule(BangBangProfile),
    /// Constant bank and angle of attack.
    Constant(ControlCommand),
}

impl ProfileMode {
    pub fn schedule(schedule: SwitchingSchedule, veh: &VehicleParams) -> Self {
        ProfileMode::Schedule(BangBangProfile::new(schedule, veh))
    }

    fn command_at(&self, t: f64) -> ControlCommand {
        match self {
            ProfileMode::Schedule(p) => p.command_at(t),
            ProfileMode::Constant(c) => *c,
        }
    }

    fn next_switch(&self, t: f64) -> f64 {
        match self {
            ProfileMode::Schedule(p) => p.schedule.to_array().into_iter().filter(|&s| s > t + 1e-9).fold(f64::INFINITY, f64::min),
            ProfileMode::Constant(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    /// Apoapsis radius, capped at the sentinel, m.
    pub r_a: f64,
    /// Time the pass ended (left the atmosphere, hit the floor or timed out), s.
    pub t_end: f64,
    /// Whether the vehicle left the sensible atmosphere climbing.
    pub exited: bool,
}

/// Predicted apoapsis at the end of the pass from `current`.
pub fn predict_apoapsis(
    current: &EntryState,
    mode: &ProfileMode,
    ratio: f64,
    models: &GuidanceModels,
    cfg: &PredictorConfig,
) -> Result<Prediction> {
    let GuidanceModels { planet, atm, veh, target } = models;
    let sentinel = cfg.sentinel_factor * target.r_a_target;
    let k = veh.accel_factor() * ratio;
    let r_floor = planet.r_eq + cfg.floor_altitude.max(atm.h_min);
    let t_stop = current.t + cfg.horizon;
    let finish = |s: &EntryState, exited: bool| -> Result<Prediction> {
        let (v, g) = to_inertial(s, planet);
        let r_a = match apoapsis_radius(s.r, v, g, planet.mu) {
            Ok(r) => r.min(sentinel),
            Err(_) => s.r,
        };
        Ok(Prediction { r_a, t_end: s.t, exited })
    };

    let density = DensityEval::new(atm);
    let mut s = *current;
    loop {
        let cmd = mode.command_at(s.t);
        let (cl, cd) = veh.aero.coefficients(cmd.alpha)?;
        let bank = cmd.sigma.to_radians().sin_cos();
        let h = cfg.dt.min(mode.next_switch(s.t) - s.t).min(t_stop - s.t);
        if h <= 0.0 {
            return finish(&s, false);
        }
        let mut rhs = |_t: f64, y: &[f64; 6]| -> Result<[f64; 6]> {
            let x = EntryState::from_array(y, 0.0);
            let q = k * density.density(planet.altitude(x.r))? * x.v * x.v;
            full_rates_with_bank(&x, bank, q * cl, q * cd, planet)
        };
        let y = match rk4_step(&mut rhs, s.t, &s.to_array(), h) {
            Ok(y) => y,
            // Diving through the density floor or to a vertical descent ends the pass.
            Err(Error::BelowAtmosphere { .. }) | Err(Error::SingularCoordinates(_)) => return finish(&s, false),
            Err(e) => return Err(e),
        };
        let next = EntryState::from_array(&y, if (s.t + h - t_stop).abs() < 1e-9 { t_stop } else { s.t + h });
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { last: Box::new(s), reason: "predictor produced a non-finite state".into() });
        }
        s = next;
        if s.r <= r_floor {
            return finish(&s, false);
        }
        if s.gamma > 0.0 {
            if s.r >= planet.r_atm {
                return finish(&s, true);
            }
            let rho = density.density(planet.altitude(s.r))?;
            let q = k * rho * s.v * s.v;
            if q * cl.hypot(cd) < cfg.quiet_accel {
                return finish(&s, true);
            }
        }
    }
}
