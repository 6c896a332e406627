//! Exit-orbit analysis: inertial conversion, Keplerian apoapsis, single-burn
//! periapsis-raise cost and outcome classification.

use serde::{Deserialize, Serialize};

use crate::dynamics::EntryState;
use crate::environment::PlanetModel;
use crate::error::{Error, Result};

pub const DAY: f64 = 86_400.0;
pub const YEAR: f64 = 365.25 * DAY;
/// Tolerance on `e` vs 1 for the parabolic boundary.
pub const PARABOLIC_TOL: f64 = 1e-10;
pub const LANDER_PERIOD: f64 = 10.0 * DAY;
pub const HYPERBOLIC_PERIOD: f64 = 2.5 * YEAR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetOrbit {
    pub r_a_target: f64,
    pub r_p_target: f64,
}

impl TargetOrbit {
    /// Target from apoapsis/periapsis altitudes above the equatorial radius.
    pub fn from_altitudes(planet: &PlanetModel, apo_alt: f64, peri_alt: f64) -> Self {
        Self { r_a_target: planet.r_eq + apo_alt, r_p_target: planet.r_eq + peri_alt }
    }

    /// 2,000,000 km x 4,000 km altitude capture orbit at Uranus.
    pub fn uranus_default(planet: &PlanetModel) -> Self {
        Self::from_altitudes(planet, 2.0e9, 4.0e6)
    }

    pub fn validate(&self, planet: &PlanetModel) -> Result<()> {
        if self.r_p_target < self.r_a_target && self.r_p_target > planet.r_eq {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("target orbit {self:?} must satisfy r_eq < r_p < r_a")))
        }
    }
}

/// Osculating orbit at atmospheric exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitOrbit {
    pub r_exit: f64,
    pub v_exit_inertial: f64,
    pub gamma_exit_inertial: f64,
    /// Semi-major axis; negative for hyperbolic orbits.
    pub a: f64,
    /// Apoapsis radius; `f64::INFINITY` when unbound.
    pub r_a: f64,
    pub e: f64,
    /// Orbital period; `f64::INFINITY` when unbound.
    pub period: f64,
}

impl ExitOrbit {
    pub fn from_inertial(r: f64, v: f64, gamma: f64, mu: f64) -> Result<Self> {
        let energy = 0.5 * v * v - mu / r;
        let h = r * v * gamma.cos();
        let e = (1.0 + 2.0 * energy * h * h / (mu * mu)).max(0.0).sqrt();
        let bound = energy < 0.0 && e < 1.0 - PARABOLIC_TOL;
        let a = if energy == 0.0 { f64::INFINITY } else { -mu / (2.0 * energy) };
        let (r_a, period) = if bound {
            (apoapsis_radius(r, v, gamma, mu)?, std::f64::consts::TAU * (a.powi(3) / mu).sqrt())
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        Ok(Self { r_exit: r, v_exit_inertial: v, gamma_exit_inertial: gamma, a, r_a, e, period })
    }

    /// Builds the exit orbit from a planet-relative state.
    pub fn from_state(state: &EntryState, planet: &PlanetModel) -> Result<Self> {
        let (v, g) = to_inertial(state, planet);
        Self::from_inertial(state.r, v, g, planet.mu)
    }

    pub fn is_bound(&self) -> bool {
        self.r_a.is_finite()
    }
}

/// Local east/north/up components of the relative velocity.
fn enu_velocity(v: f64, gamma: f64, psi: f64) -> [f64; 3] {
    let (sg, cg) = gamma.sin_cos();
    let (sp, cp) = psi.sin_cos();
    [v * cg * sp, v * cg * cp, v * sg]
}

/// Inertial speed and flight-path angle from a planet-relative state.
pub fn to_inertial(state: &EntryState, planet: &PlanetModel) -> (f64, f64) {
    let [e, n, u] = enu_velocity(state.v, state.gamma, state.psi);
    let e = e + planet.omega * state.r * state.phi.cos();
    let horiz = e.hypot(n);
    (horiz.hypot(u), u.atan2(horiz))
}

/// Inertial speed, flight-path angle and heading from a planet-relative state.
pub fn to_inertial_full(state: &EntryState, planet: &PlanetModel) -> (f64, f64, f64) {
    let [e, n, u] = enu_velocity(state.v, state.gamma, state.psi);
    let e = e + planet.omega * state.r * state.phi.cos();
    let horiz = e.hypot(n);
    (horiz.hypot(u), u.atan2(horiz), e.atan2(n).rem_euclid(std::f64::consts::TAU))
}

/// Inverse of [`to_inertial_full`]: planet-relative speed, flight-path angle
/// and heading from inertial ones at the given position.
pub fn from_inertial(v_i: f64, gamma_i: f64, psi_i: f64, r: f64, phi: f64, planet: &PlanetModel) -> (f64, f64, f64) {
    let [e, n, u] = enu_velocity(v_i, gamma_i, psi_i);
    let e = e - planet.omega * r * phi.cos();
    let horiz = e.hypot(n);
    (horiz.hypot(u), u.atan2(horiz), e.atan2(n).rem_euclid(std::f64::consts::TAU))
}

/// Keplerian apoapsis radius; `f64::INFINITY` for unbound states.
pub fn apoapsis_radius(r: f64, v: f64, gamma: f64, mu: f64) -> Result<f64> {
    let s = 2.0 * mu / r - v * v;
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let a = mu / s;
    let cg = gamma.cos();
    let disc = 1.0 - v * v * r * r * cg * cg / (mu * a);
    if disc < -1e-12 {
        return Err(Error::NumericalDomain(format!("apoapsis discriminant {disc:e} < 0")));
    }
    Ok(a * (1.0 + disc.max(0.0).sqrt()))
}

/// Single-burn periapsis-raise cost at apoapsis, returned as a magnitude
/// together with the sign of the required burn (+1 prograde, -1 retrograde).
pub fn single_burn_dv_signed(r_a: f64, a: f64, target: &TargetOrbit, mu: f64) -> Result<(f64, f64)> {
    if !(r_a.is_finite() && a > 0.0) {
        return Err(Error::Hyperbolic);
    }
    if r_a <= target.r_p_target {
        return Err(Error::NumericalDomain(format!("apoapsis {r_a} below target periapsis")));
    }
    let after = 1.0 / r_a - 1.0 / (r_a + target.r_p_target);
    let before = (1.0 / r_a - 1.0 / (2.0 * a)).max(0.0);
    let dv = (2.0 * mu).sqrt() * (after.sqrt() - before.sqrt());
    Ok((dv.abs(), if dv < 0.0 { -1.0 } else { 1.0 }))
}

pub fn single_burn_dv(r_a: f64, a: f64, target: &TargetOrbit, mu: f64) -> Result<f64> {
    single_burn_dv_signed(r_a, a, target, mu).map(|(dv, _)| dv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Lander,
    Hyperbolic,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Lander => "lander",
            Outcome::Hyperbolic => "hyperbolic",
        }
    }
}

/// Classifies a terminated pass. `None` means the vehicle impacted or never
/// left the atmosphere.
pub fn classify_outcome(exit: Option<&ExitOrbit>, _target: &TargetOrbit) -> Outcome {
    let Some(o) = exit else { return Outcome::Lander };
    if o.e >= 1.0 - PARABOLIC_TOL || !o.period.is_finite() || o.period > HYPERBOLIC_PERIOD {
        Outcome::Hyperbolic
    } else if o.period < LANDER_PERIOD {
        Outcome::Lander
    } else {
        Outcome::Success
    }
}
