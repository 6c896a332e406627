//! Dispersion sampling and single closed-loop runs.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, EventKind, EventSpec, Models, Trajectory};
use crate::environment::sample_atmosphere;
use crate::error::{Error, Result};
use crate::guidance::{GuidanceLaw, TelemetryRow};
use crate::orbit::{classify_outcome, single_burn_dv, ExitOrbit, Outcome};

use super::config::RunConfig;

/// Flight-path angle (rad) below which a coordinate singularity is read as
/// a dive into the planet.
const DIVE_GAMMA: f64 = -1.3;

/// One run's draws. Every draw is taken regardless of which sigmas are zero,
/// so runs with the same seed share the same random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledRun {
    pub efpa_deg: f64,
    pub mass_factor: f64,
    pub cl_factor: f64,
    pub cd_factor: f64,
    pub atm_seed: u64,
}

pub fn sample_run(cfg: &RunConfig, seed: u64) -> SampledRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let d = &cfg.dispersions;
    let (z_efpa, z_mass, z_cl, z_cd) = (z(), z(), z(), z());
    SampledRun {
        efpa_deg: cfg.entry.efpa_deg + d.efpa_sigma * z_efpa,
        mass_factor: 1.0 + d.mass_sigma * z_mass,
        cl_factor: 1.0 + d.aero_scale_sigma * z_cl,
        cd_factor: 1.0 + d.aero_scale_sigma * z_cd,
        atm_seed: rng.gen(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Success,
    Lander,
    Hyperbolic,
    /// The truth propagation failed; counted apart from the three classes.
    Diagnostic,
}

impl RunOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunOutcome::Success => "success",
            RunOutcome::Lander => "lander",
            RunOutcome::Hyperbolic => "hyperbolic",
            RunOutcome::Diagnostic => "diagnostic",
        }
    }
}

impl From<Outcome> for RunOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Success => RunOutcome::Success,
            Outcome::Lander => RunOutcome::Lander,
            Outcome::Hyperbolic => RunOutcome::Hyperbolic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: usize,
    pub seed: u64,
    /// Inertial EFPA actually flown, deg.
    pub efpa_actual: f64,
    pub outcome: RunOutcome,
    /// Periapsis-raise cost, m/s; present iff the run succeeded.
    pub delta_v: Option<f64>,
    pub exit_orbit: Option<ExitOrbit>,
    /// g; NaN when the propagation ended in an error.
    pub peak_g: f64,
    /// `(r_a - r_a*) / r_a*` for bound exits.
    pub ra_error: Option<f64>,
    /// Wall-clock seconds spent on the run.
    #[serde(skip)]
    pub wall_time: f64,
    pub diagnostic: Option<String>,
    pub telemetry: Option<PathBuf>,
}

/// A run with its truth trajectory and guidance telemetry.
pub struct Flight {
    pub result: RunResult,
    pub trajectory: Option<Trajectory>,
    pub telemetry: Vec<TelemetryRow>,
}

/// Flies one pass with the dispersions drawn from `seed`.
pub fn simulate_once(cfg: &RunConfig, run_id: usize, seed: u64) -> Result<RunResult> {
    Ok(fly(cfg, run_id, seed)?.result)
}

/// Like [`simulate_once`] but keeps the trajectory and telemetry.
pub fn fly(cfg: &RunConfig, run_id: usize, seed: u64) -> Result<Flight> {
    let started = std::time::Instant::now();
    let draw = sample_run(cfg, seed);
    let planet = &cfg.planet;
    let atm = sample_atmosphere(&cfg.atmosphere, &cfg.dispersions.atm, draw.atm_seed);
    let mut veh = cfg.vehicle.with_aero(cfg.vehicle.aero.scaled(draw.cl_factor, draw.cd_factor));
    veh.mass *= draw.mass_factor;
    let models = Models { planet, atm: &atm, veh: &veh };

    let mut law = GuidanceLaw::new(cfg.guidance.clone(), cfg.guidance_models()?);
    let initial = cfg.entry.with_efpa(draw.efpa_deg).to_state(planet);
    let events = [
        EventSpec::exit(planet),
        EventSpec::impact(planet.r_eq + cfg.impact_altitude),
        EventSpec::time_limit(cfg.time_limit),
    ];
    let mut result = RunResult {
        run_id,
        seed,
        efpa_actual: draw.efpa_deg,
        outcome: RunOutcome::Diagnostic,
        delta_v: None,
        exit_orbit: None,
        peak_g: f64::NAN,
        ra_error: None,
        wall_time: 0.0,
        diagnostic: None,
        telemetry: None,
    };
    let trajectory = match propagate(initial, &mut law, &cfg.integrator, &events, &models) {
        Ok(traj) => {
            result.peak_g = traj.peak_g();
            let exit = match traj.event.kind {
                EventKind::AtmosphericExit => Some(ExitOrbit::from_state(traj.final_state(), planet)?),
                _ => None,
            };
            let outcome = classify_outcome(exit.as_ref(), &cfg.target);
            result.outcome = outcome.into();
            if let Some(o) = &exit {
                if o.is_bound() {
                    result.ra_error = Some((o.r_a - cfg.target.r_a_target) / cfg.target.r_a_target);
                }
                if outcome == Outcome::Success {
                    result.delta_v = Some(single_burn_dv(o.r_a, o.a, &cfg.target, planet.mu)?);
                }
            }
            result.exit_orbit = exit;
            Some(traj)
        }
        Err(Error::Diverged { last, reason }) if last.gamma < DIVE_GAMMA => {
            log::debug!("run {run_id}: dive ended in a coordinate singularity ({reason})");
            result.outcome = RunOutcome::Lander;
            None
        }
        Err(e) => {
            result.diagnostic = Some(e.to_string());
            None
        }
    };
    result.wall_time = started.elapsed().as_secs_f64();
    Ok(Flight { result, trajectory, telemetry: std::mem::take(&mut law.telemetry) })
}
