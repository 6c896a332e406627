//! Three-switch bang-bang control profiles, the longitudinal Hamiltonian and
//! its costates, and a brute-force switching-time optimizer used as a
//! reference solution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{longitudinal_rates_with_aero, rk4_step, ControlCommand, ControlLaw, EntryState, LongitudinalState};
use crate::environment::{AtmosphereModel, PlanetModel};
use crate::error::{Error, Result};
use crate::numerics::{brent_root_with, golden_section};
use crate::orbit::TargetOrbit;
use crate::vehicle::{AeroModel, VehicleParams};

/// Absolute switching times of the three-switch profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSchedule {
    pub t_s1: f64,
    pub t_s2: f64,
    pub t_s3: f64,
}

impl SwitchingSchedule {
    pub fn new(t_s1: f64, t_s2: f64, t_s3: f64) -> Self {
        Self { t_s1, t_s2, t_s3 }
    }

    pub fn is_ordered(&self) -> bool {
        self.t_s1 <= self.t_s2 && self.t_s2 <= self.t_s3
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.t_s1, self.t_s2, self.t_s3]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    /// All switches at `t`: lift-down at alpha_min from `t` on.
    pub fn immediate(t: f64) -> Self {
        Self::new(t, t, t)
    }

    /// Which switches actually occur after `t0`, with coincident times merged
    /// within `tol`.
    pub fn structure(&self, t0: f64, tol: f64) -> SwitchStructure {
        let at_start = |t: f64| t - t0 <= tol;
        let same = |a: f64, b: f64| (b - a).abs() <= tol;
        let [t1, t2, t3] = self.to_array();
        if at_start(t2) {
            if at_start(t3) {
                SwitchStructure::LiftDown
            } else {
                SwitchStructure::LiftDownAlpha
            }
        } else if same(t1, t2) && same(t2, t3) {
            SwitchStructure::SigmaOnly
        } else if same(t1, t2) || same(t2, t3) || at_start(t1) {
            SwitchStructure::Partial
        } else {
            SwitchStructure::Full
        }
    }

    /// Switching-function conditions implied by the switches that occur.
    pub fn anchors(&self, t0: f64, tol: f64) -> Vec<Anchor> {
        match self.structure(t0, tol) {
            SwitchStructure::LiftDown => Vec::new(),
            SwitchStructure::LiftDownAlpha => vec![Anchor::AlphaDown(self.t_s3)],
            SwitchStructure::SigmaOnly => vec![Anchor::Sigma(self.t_s2)],
            SwitchStructure::Partial | SwitchStructure::Full => {
                let mut v = Vec::new();
                if self.t_s1 - t0 > tol && self.t_s2 - self.t_s1 > tol {
                    v.push(Anchor::AlphaUp(self.t_s1));
                }
                v.push(Anchor::Sigma(self.t_s2));
                if self.t_s3 - self.t_s2 > tol {
                    v.push(Anchor::AlphaDown(self.t_s3));
                }
                v
            }
        }
    }
}

/// Switch pattern of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SwitchStructure {
    /// Lift-down at alpha_min throughout.
    LiftDown,
    /// Lift-down from the start with one angle-of-attack switch.
    LiftDownAlpha,
    /// One bank switch, no angle-of-attack arcs.
    SigmaOnly,
    /// Alpha switch, bank switch, alpha switch at distinct times.
    Full,
    /// A bank switch with only one of the alpha_max arcs.
    Partial,
}

/// Piecewise-constant command sequence of the three-switch profile:
///
/// | interval        | bank       | angle of attack |
/// |-----------------|------------|-----------------|
/// | `t < t_s1`      | `sigma_lo` | `alpha_lo`      |
/// | `[t_s1, t_s2)`  | `sigma_lo` | `alpha_hi`      |
/// | `[t_s2, t_s3)`  | `sigma_hi` | `alpha_hi`      |
/// | `t >= t_s3`     | `sigma_hi` | `alpha_lo`      |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangBangProfile {
    pub schedule: SwitchingSchedule,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl BangBangProfile {
    pub fn new(schedule: SwitchingSchedule, veh: &VehicleParams) -> Self {
        Self {
            schedule,
            sigma_lo: veh.sigma_min,
            sigma_hi: veh.sigma_max,
            alpha_lo: veh.alpha_min,
            alpha_hi: veh.alpha_max,
        }
    }

    pub fn command_at(&self, t: f64) -> ControlCommand {
        let s = &self.schedule;
        if t < s.t_s1 {
            ControlCommand::new(self.sigma_lo, self.alpha_lo)
        } else if t < s.t_s2 {
            ControlCommand::new(self.sigma_lo, self.alpha_hi)
        } else if t < s.t_s3 {
            ControlCommand::new(self.sigma_hi, self.alpha_hi)
        } else {
            ControlCommand::new(self.sigma_hi, self.alpha_lo)
        }
    }
}

pub fn command_at(profile: &BangBangProfile, t: f64) -> ControlCommand {
    profile.command_at(t)
}

/// Open-loop flight of the profile; commands change exactly at the switches.
impl ControlLaw for BangBangProfile {
    fn command(&mut self, state: &EntryState, _: f64) -> ControlCommand {
        self.command_at(state.t)
    }

    fn next_update(&self, t: f64) -> f64 {
        self.schedule.to_array().into_iter().filter(|&s| s > t).fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Hamiltonian machinery

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostateVector {
    pub lambda_r: f64,
    pub lambda_v: f64,
    pub lambda_gamma: f64,
}

impl CostateVector {
    pub fn new(lambda_r: f64, lambda_v: f64, lambda_gamma: f64) -> Self {
        Self { lambda_r, lambda_v, lambda_gamma }
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.lambda_r, self.lambda_v, self.lambda_gamma]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.lambda_r, c * self.lambda_v, c * self.lambda_gamma)
    }

    /// `self + c * other`
    pub fn plus(&self, c: f64, other: &Self) -> Self {
        Self::new(
            self.lambda_r + c * other.lambda_r,
            self.lambda_v + c * other.lambda_v,
            self.lambda_gamma + c * other.lambda_gamma,
        )
    }

    pub fn dot(&self, f: &[f64; 3]) -> f64 {
        self.lambda_r * f[0] + self.lambda_v * f[1] + self.lambda_gamma * f[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingFunctions {
    pub h_alpha_up: f64,
    pub h_alpha_down: f64,
    pub h_sigma: f64,
}

/// Angle-of-attack switching functions for lift-up and lift-down flight and
/// the bank switching function `lambda_gamma`.
pub fn switching_functions(lambda_v: f64, lambda_gamma: f64, v: f64, aero: &AeroModel) -> Result<SwitchingFunctions> {
    let AeroModel::Linear { cd_alpha, cl_alpha, .. } = *aero else {
        return Err(Error::InvalidConfig("switching functions need a linear aero model".into()));
    };
    let drag = -lambda_v * cd_alpha;
    let lift = lambda_gamma * cl_alpha / v;
    Ok(SwitchingFunctions { h_alpha_up: drag + lift, h_alpha_down: drag - lift, h_sigma: lambda_gamma })
}

struct AeroTerms {
    rho: f64,
    drho: f64,
    k: f64,
    cl: f64,
    cd: f64,
}

fn aero_terms(s: &LongitudinalState, alpha: f64, planet: &PlanetModel, atm: &AtmosphereModel, veh: &VehicleParams) -> Result<AeroTerms> {
    let (rho, drho) = atm.density_with_slope(planet.altitude(s.r))?;
    let (cl, cd) = veh.aero.coefficients(alpha)?;
    Ok(AeroTerms { rho, drho, k: veh.accel_factor(), cl, cd })
}

/// `H = lambda . f(x, u)` for the longitudinal dynamics.
pub fn hamiltonian(
    state: &LongitudinalState,
    costate: &CostateVector,
    u1: f64,
    alpha: f64,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
) -> Result<f64> {
    let a = aero_terms(state, alpha, planet, atm, veh)?;
    let q = a.k * a.rho * state.v * state.v;
    Ok(costate.dot(&longitudinal_rates_with_aero(state, u1, q * a.cl, q * a.cd, planet.mu)))
}

/// Costate rates `-dH/d(r, V, gamma)`.
pub fn costate_derivatives(
    state: &LongitudinalState,
    costate: &CostateVector,
    u1: f64,
    alpha: f64,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
) -> Result<CostateVector> {
    let a = aero_terms(state, alpha, planet, atm, veh)?;
    Ok(costate_rates(state, costate, u1, &a, planet.mu))
}

fn costate_rates(s: &LongitudinalState, l: &CostateVector, u1: f64, a: &AeroTerms, mu: f64) -> CostateVector {
    let LongitudinalState { r, v, gamma, .. } = *s;
    let (sg, cg) = gamma.sin_cos();
    let (k, rho, drho) = (a.k, a.rho, a.drho);
    let r2 = r * r;
    let r3 = r2 * r;

    let dfv_dr = -k * drho * v * v * a.cd + 2.0 * mu * sg / r3;
    let dfg_dr = k * drho * v * a.cl * u1 + (-v / r2 + 2.0 * mu / (r3 * v)) * cg;
    let dfr_dv = sg;
    let dfv_dv = -2.0 * k * rho * v * a.cd;
    let dfg_dv = k * rho * a.cl * u1 + (1.0 / r + mu / (r2 * v * v)) * cg;
    let dfr_dg = v * cg;
    let dfv_dg = -mu * cg / r2;
    let dfg_dg = -(v / r - mu / (r2 * v)) * sg;

    CostateVector::new(
        -(l.lambda_v * dfv_dr + l.lambda_gamma * dfg_dr),
        -(l.lambda_r * dfr_dv + l.lambda_v * dfv_dv + l.lambda_gamma * dfg_dv),
        -(l.lambda_r * dfr_dg + l.lambda_v * dfv_dg + l.lambda_gamma * dfg_dg),
    )
}

/// Semi-major axis and apoapsis radius with their gradients with respect to
/// `(r, V, gamma)`.
fn orbit_gradients(s: &LongitudinalState, mu: f64) -> Result<((f64, [f64; 3]), (f64, [f64; 3]))> {
    let LongitudinalState { r, v, gamma, .. } = *s;
    let sv = 2.0 * mu / r - v * v;
    if sv <= 0.0 {
        return Err(Error::Hyperbolic);
    }
    let a = mu / sv;
    let da = [2.0 * a * a / (r * r), 2.0 * v * a * a / mu, 0.0];
    let (sg, cg) = gamma.sin_cos();
    let h2 = (r * v * cg).powi(2);
    let mu2 = mu * mu;
    let q = h2 * sv / mu2;
    let dq = [
        (2.0 * h2 * sv / r - h2 * 2.0 * mu / (r * r)) / mu2,
        (2.0 * h2 * sv / v - 2.0 * v * h2) / mu2,
        sv * (-2.0 * r * r * v * v * sg * cg) / mu2,
    ];
    let e = (1.0 - q).max(0.0).sqrt();
    let de = if e < 1e-12 { [0.0; 3] } else { dq.map(|d| -d / (2.0 * e)) };
    let ra = a * (1.0 + e);
    let dra = [0, 1, 2].map(|i| da[i] * (1.0 + e) + a * de[i]);
    Ok(((a, da), (ra, dra)))
}

/// Gradient of the Keplerian apoapsis radius at `state`.
pub fn apoapsis_gradient(state: &LongitudinalState, mu: f64) -> Result<[f64; 3]> {
    orbit_gradients(state, mu).map(|(_, (_, d))| d)
}

/// Terminal costates for the apoapsis targeting constraint: the gradient of
/// `r_a` at the exit state with unit multiplier.
pub fn terminal_costates(exit_state: &LongitudinalState, _target: &TargetOrbit, planet: &PlanetModel) -> Result<CostateVector> {
    apoapsis_gradient(exit_state, planet.mu).map(CostateVector::from_array)
}

/// Single-burn cost at a vacuum state and its gradient with respect to
/// `(r, V, gamma)`.
pub fn dv_with_gradient(state: &LongitudinalState, target: &TargetOrbit, mu: f64) -> Result<(f64, [f64; 3])> {
    let ((a, da), (ra, dra)) = orbit_gradients(state, mu)?;
    let rp = target.r_p_target;
    let k = (2.0 * mu).sqrt();
    let big_a = 1.0 / ra - 1.0 / (ra + rp);
    let big_b = (1.0 / ra - 1.0 / (2.0 * a)).max(1e-300);
    let dv = k * (big_a.sqrt() - big_b.sqrt());
    let d_ra = k * ((-1.0 / (ra * ra) + 1.0 / ((ra + rp) * (ra + rp))) / (2.0 * big_a.sqrt()) + 1.0 / (ra * ra) / (2.0 * big_b.sqrt()));
    let d_a = -k / (4.0 * a * a * big_b.sqrt());
    let sign = if dv < 0.0 { -1.0 } else { 1.0 };
    Ok((dv.abs(), [0, 1, 2].map(|i| sign * (d_ra * dra[i] + d_a * da[i]))))
}

// ---------------------------------------------------------------------------
// Longitudinal propagation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalConfig {
    /// RK4 step, s.
    pub dt: f64,
    pub t_max: f64,
    /// Aerodynamic acceleration (m/s^2) below which an ascending vehicle is
    /// considered out of the atmosphere.
    pub quiet_accel: f64,
    /// Altitude floor below which the pass counts as a lander, m.
    pub floor_altitude: f64,
}

impl Default for LongitudinalConfig {
    fn default() -> Self {
        Self { dt: 0.2, t_max: 3_000.0, quiet_accel: 1e-7, floor_altitude: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongitudinalEnd {
    /// Left the sensible atmosphere while climbing.
    Exit,
    /// Reached the altitude floor or stopped climbing below the interface.
    Captured,
    TimeLimit,
}

/// One RK4 step of a longitudinal trajectory; the command is held over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalStep {
    pub state: LongitudinalState,
    pub cmd: ControlCommand,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalTrajectory {
    /// Steps in time order; the final entry carries `h = 0`.
    pub steps: Vec<LongitudinalStep>,
    pub end: LongitudinalEnd,
}

impl LongitudinalTrajectory {
    pub fn final_state(&self) -> &LongitudinalState {
        &self.steps.last().expect("non-empty").state
    }

    /// Apoapsis radius after the pass: the Keplerian value for exits, 0 for
    /// captured or timed-out passes.
    pub fn apoapsis(&self, planet: &PlanetModel) -> f64 {
        match self.end {
            LongitudinalEnd::Exit => {
                let s = self.final_state();
                crate::orbit::apoapsis_radius(s.r, s.v, s.gamma, planet.mu).unwrap_or(0.0)
            }
            _ => 0.0,
        }
    }
}

/// Propagates the longitudinal dynamics under a time-scheduled command,
/// stepping exactly onto each breakpoint.
pub fn propagate_longitudinal<F>(
    entry: &LongitudinalState,
    mut law: F,
    breakpoints: &[f64],
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
    cfg: &LongitudinalConfig,
) -> Result<LongitudinalTrajectory>
where
    F: FnMut(f64) -> ControlCommand,
{
    let k = veh.accel_factor();
    let floor = planet.r_eq + cfg.floor_altitude.max(atm.h_min);
    let mut bps: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > entry.t).collect();
    bps.sort_by(f64::total_cmp);
    let mut next_bp = 0;
    let mut s = *entry;
    let mut steps = Vec::with_capacity((800.0 / cfg.dt) as usize);
    let mut min_r = s.r;
    loop {
        let cmd = law(s.t);
        let (cl, cd) = veh.aero.coefficients(cmd.alpha)?;
        let u1 = cmd.u1();
        let mut rhs = |_t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
            let x = LongitudinalState::from_array(y, 0.0);
            let h = planet.altitude(x.r);
            if h < atm.h_min || !(x.v > 0.0) {
                return Err(Error::NumericalDomain("below floor".into()));
            }
            let q = k * atm.density(h)? * x.v * x.v;
            Ok(longitudinal_rates_with_aero(&x, u1, q * cl, q * cd, planet.mu))
        };
        let drag = k * atm.density(planet.altitude(s.r)).unwrap_or(f64::INFINITY) * s.v * s.v * cd;
        let climbing = s.gamma > 0.0;
        if climbing && drag < cfg.quiet_accel && steps.len() > 1 {
            steps.push(LongitudinalStep { state: s, cmd, h: 0.0 });
            let end = if s.r >= planet.r_atm || reaches(s, planet.r_atm, planet.mu) {
                LongitudinalEnd::Exit
            } else {
                LongitudinalEnd::Captured
            };
            return Ok(LongitudinalTrajectory { steps, end });
        }
        if climbing && s.r >= planet.r_atm {
            steps.push(LongitudinalStep { state: s, cmd, h: 0.0 });
            return Ok(LongitudinalTrajectory { steps, end: LongitudinalEnd::Exit });
        }
        // Turned back down inside the atmosphere after the lowest point.
        if !climbing && s.r > min_r + 1.0 {
            steps.push(LongitudinalStep { state: s, cmd, h: 0.0 });
            return Ok(LongitudinalTrajectory { steps, end: LongitudinalEnd::Captured });
        }
        if s.t >= entry.t + cfg.t_max {
            steps.push(LongitudinalStep { state: s, cmd, h: 0.0 });
            return Ok(LongitudinalTrajectory { steps, end: LongitudinalEnd::TimeLimit });
        }
        while next_bp < bps.len() && bps[next_bp] <= s.t + 1e-12 {
            next_bp += 1;
        }
        let mut t_next = s.t + cfg.dt;
        if next_bp < bps.len() && bps[next_bp] < t_next {
            t_next = bps[next_bp];
        }
        let h = t_next - s.t;
        let y = match rk4_step(&mut rhs, s.t, &s.to_array(), h) {
            Ok(y) if y[0] > floor => y,
            _ => {
                steps.push(LongitudinalStep { state: s, cmd, h: 0.0 });
                return Ok(LongitudinalTrajectory { steps, end: LongitudinalEnd::Captured });
            }
        };
        steps.push(LongitudinalStep { state: s, cmd, h });
        s = LongitudinalState::from_array(&y, t_next);
        min_r = min_r.min(s.r);
    }
}

/// Whether a vacuum arc from `s` climbs to radius `r`.
fn reaches(s: LongitudinalState, r: f64, mu: f64) -> bool {
    crate::orbit::apoapsis_radius(s.r, s.v, s.gamma, mu).map(|ra| ra >= r).unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Reference optimizer

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Points per axis of the coarse grid over the two alpha_max arc durations.
    pub grid: usize,
    /// Largest alpha_max arc duration searched, s.
    pub max_arc: f64,
    /// Sampling step when bracketing the bank switch time, s.
    pub scan_step: f64,
    /// Relative apoapsis tolerance for feasibility.
    pub target_tol: f64,
    pub refine_passes: usize,
    /// Golden-section tolerance on arc durations, s.
    pub xtol: f64,
    /// Relative cost margin within which a schedule with fewer switches is
    /// preferred.
    pub tie_tol: f64,
    pub propagation: LongitudinalConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid: 9,
            max_arc: 240.0,
            scan_step: 8.0,
            target_tol: 1e-3,
            refine_passes: 12,
            xtol: 0.02,
            tie_tol: 1e-7,
            propagation: LongitudinalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub schedule: SwitchingSchedule,
    pub delta_v: f64,
    pub r_a: f64,
    /// Durations of the lift-up and lift-down alpha_max arcs before clipping.
    pub arcs: (f64, f64),
    /// Best cost after the grid stage and after each refinement pass.
    pub history: Vec<f64>,
    pub feasible_cells: usize,
}

struct OracleProblem<'a> {
    entry: LongitudinalState,
    planet: &'a PlanetModel,
    atm: &'a AtmosphereModel,
    veh: &'a VehicleParams,
    target: &'a TargetOrbit,
    cfg: &'a OracleConfig,
    t_hi: f64,
}

struct Candidate {
    schedule: SwitchingSchedule,
    dv: f64,
    r_a: f64,
}

impl<'a> OracleProblem<'a> {
    fn new(
        entry: &LongitudinalState,
        planet: &'a PlanetModel,
        atm: &'a AtmosphereModel,
        veh: &'a VehicleParams,
        target: &'a TargetOrbit,
        cfg: &'a OracleConfig,
    ) -> Result<Self> {
        // Latest useful bank switch: the end of a full lift-up pass.
        let up = propagate_longitudinal(
            entry,
            |_| ControlCommand::new(veh.sigma_min, veh.alpha_min),
            &[],
            planet,
            atm,
            veh,
            &cfg.propagation,
        )?;
        let t_hi = up.final_state().t + cfg.scan_step;
        Ok(Self { entry: *entry, planet, atm, veh, target, cfg, t_hi })
    }

    /// Schedule from arc durations and a (possibly pre-entry) bank switch time.
    fn schedule(&self, a: f64, b: f64, t2: f64) -> SwitchingSchedule {
        let t0 = self.entry.t;
        SwitchingSchedule::new((t2 - a).max(t0), t2.max(t0), (t2 + b).max(t0))
    }

    fn fly(&self, sched: &SwitchingSchedule) -> Result<LongitudinalTrajectory> {
        let prof = BangBangProfile::new(*sched, self.veh);
        propagate_longitudinal(
            &self.entry,
            |t| prof.command_at(t),
            &sched.to_array(),
            self.planet,
            self.atm,
            self.veh,
            &self.cfg.propagation,
        )
    }

    /// Log apoapsis error, clamped so unbound and captured passes keep a sign.
    fn miss(&self, sched: &SwitchingSchedule) -> f64 {
        let Ok(traj) = self.fly(sched) else { return -10.0 };
        let ra = traj.apoapsis(self.planet);
        if ra <= 0.0 {
            -10.0
        } else if ra.is_infinite() {
            10.0
        } else {
            (ra / self.target.r_a_target).ln().clamp(-10.0, 10.0)
        }
    }

    /// Solves the bank switch time hitting the target for given arc durations.
    fn solve(&self, a: f64, b: f64) -> Option<Candidate> {
        let lo = self.entry.t - b;
        let mut f = |t2: f64| self.miss(&self.schedule(a, b, t2));
        let mut x0 = lo;
        let mut f0 = f(x0);
        if f0 > 0.0 {
            return None;
        }
        loop {
            let x1 = (x0 + self.cfg.scan_step).min(self.t_hi);
            let f1 = f(x1);
            if f1 >= 0.0 {
                let sol = brent_root_with(&mut f, x0, x1, f0, f1, 1e-9, 200)?;
                return self.accept(self.schedule(a, b, sol.x));
            }
            if x1 >= self.t_hi {
                return None;
            }
            x0 = x1;
            f0 = f1;
        }
    }

    /// Immediate lift-down with one alpha switch at `t_s3`, solved for the target.
    fn solve_lift_down(&self) -> Option<Candidate> {
        let t0 = self.entry.t;
        let sched = |t3: f64| SwitchingSchedule::new(t0, t0, t3);
        let mut f = |t3: f64| self.miss(&sched(t3));
        let f0 = f(t0);
        if f0 > 0.0 {
            return None;
        }
        let mut x0 = t0;
        let mut fx0 = f0;
        while x0 < self.t_hi {
            let x1 = (x0 + self.cfg.scan_step).min(self.t_hi);
            let f1 = f(x1);
            if f1 >= 0.0 {
                let sol = brent_root_with(&mut f, x0, x1, fx0, f1, 1e-9, 200)?;
                return self.accept(sched(sol.x));
            }
            x0 = x1;
            fx0 = f1;
        }
        None
    }

    fn accept(&self, sched: SwitchingSchedule) -> Option<Candidate> {
        let traj = self.fly(&sched).ok()?;
        if traj.end != LongitudinalEnd::Exit {
            return None;
        }
        let ra = traj.apoapsis(self.planet);
        if !ra.is_finite() || ((ra - self.target.r_a_target) / self.target.r_a_target).abs() > self.cfg.target_tol {
            return None;
        }
        let (dv, _) = dv_with_gradient(traj.final_state(), self.target, self.planet.mu).ok()?;
        Some(Candidate { schedule: sched, dv, r_a: ra })
    }

    fn cost(&self, a: f64, b: f64) -> f64 {
        self.solve(a, b).map(|c| c.dv).unwrap_or(f64::INFINITY)
    }
}

/// Finds the minimum-cost three-switch schedule that meets the apoapsis
/// target, by a grid over the two alpha_max arc durations (bank switch time
/// solved for each cell) followed by coordinate-wise golden-section passes.
pub fn oracle_optimize(
    entry: &LongitudinalState,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
    target: &TargetOrbit,
    cfg: &OracleConfig,
) -> Result<OracleSolution> {
    if cfg.grid < 2 {
        return Err(Error::InvalidConfig("oracle grid needs at least 2 points per axis".into()));
    }
    let prob = OracleProblem::new(entry, planet, atm, veh, target, cfg)?;

    let step = cfg.max_arc / (cfg.grid - 1) as f64;
    let mut best: Option<(f64, f64, Candidate)> = None;
    let mut feasible = 0;
    for i in 0..cfg.grid {
        for j in 0..cfg.grid {
            let (a, b) = (i as f64 * step, j as f64 * step);
            if let Some(c) = prob.solve(a, b) {
                feasible += 1;
                if best.as_ref().is_none_or(|(_, _, bc)| c.dv < bc.dv) {
                    best = Some((a, b, c));
                }
            }
        }
    }
    let Some((mut a, mut b, mut cand)) = best else {
        return Err(Error::CorridorInfeasible("no grid cell meets the apoapsis target".into()));
    };
    let mut history = vec![cand.dv];
    for _ in 0..cfg.refine_passes {
        let before = cand.dv;
        let (na, fa) = golden_section(|x| prob.cost(x, b), (a - step).max(0.0), a + step, cfg.xtol);
        if fa < cand.dv {
            a = na;
            cand = prob.solve(a, b).expect("evaluated feasible");
        }
        let (nb, fb) = golden_section(|x| prob.cost(a, x), (b - step).max(0.0), b + step, cfg.xtol);
        if fb < cand.dv {
            b = nb;
            cand = prob.solve(a, b).expect("evaluated feasible");
        }
        history.push(cand.dv);
        if before - cand.dv < 1e-9 * before {
            break;
        }
    }
    // Early lift-up above the sensible atmosphere changes nothing, so near-ties
    // go to the simpler structures.
    let margin = cfg.tie_tol * cand.dv;
    let t0 = entry.t;
    let simpler = [prob.solve(0.0, 0.0).map(|c| (c, (0.0, 0.0))), prob.solve_lift_down().map(|c| {
        let b = c.schedule.t_s3 - t0;
        (c, (0.0, b))
    })];
    for (c, arcs) in simpler.into_iter().flatten() {
        if c.dv <= cand.dv + margin && (a, b) != arcs {
            a = arcs.0;
            b = arcs.1;
            cand = c;
            break;
        }
    }
    Ok(OracleSolution { schedule: cand.schedule, delta_v: cand.dv, r_a: cand.r_a, arcs: (a, b), history, feasible_cells: feasible })
}

/// Feasible schedule and its cost for given lift-up and lift-down alpha_max
/// arc durations, with the bank switch solved to meet the target.
pub fn oracle_evaluate(
    entry: &LongitudinalState,
    arcs: (f64, f64),
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
    target: &TargetOrbit,
    cfg: &OracleConfig,
) -> Result<Option<(SwitchingSchedule, f64)>> {
    let prob = OracleProblem::new(entry, planet, atm, veh, target, cfg)?;
    Ok(prob.solve(arcs.0, arcs.1).map(|c| (c.schedule, c.dv)))
}

/// Longitudinal trajectory flown by a schedule.
pub fn fly_schedule(
    entry: &LongitudinalState,
    schedule: &SwitchingSchedule,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
    cfg: &LongitudinalConfig,
) -> Result<LongitudinalTrajectory> {
    let prof = BangBangProfile::new(*schedule, veh);
    propagate_longitudinal(entry, |t| prof.command_at(t), &schedule.to_array(), planet, atm, veh, cfg)
}

// ---------------------------------------------------------------------------
// Backward costates and switching-function traces

/// Which zero crossing fixes the apoapsis multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// `H_sigma` vanishes at the given time.
    Sigma(f64),
    /// `H_alpha,down` vanishes at the given time.
    AlphaDown(f64),
    /// `H_alpha,up` vanishes at the given time.
    AlphaUp(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub r: f64,
    pub v: f64,
    pub gamma: f64,
    pub lambda_r: f64,
    pub lambda_v: f64,
    pub lambda_gamma: f64,
    pub h_alpha_up: f64,
    pub h_alpha_down: f64,
    pub h_sigma: f64,
    pub sigma: f64,
    pub alpha: f64,
}

/// Propagates `lambda' = -dH/dx` backward along a trajectory from `terminal`.
/// States at step midpoints are regenerated with half RK4 steps.
pub fn propagate_costates_backward(
    traj: &LongitudinalTrajectory,
    terminal: CostateVector,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
) -> Result<Vec<CostateVector>> {
    let k = veh.accel_factor();
    let n = traj.steps.len();
    let mut out = vec![CostateVector::default(); n];
    out[n - 1] = terminal;
    let mut lam = terminal;
    for i in (0..n - 1).rev() {
        let st = &traj.steps[i];
        let (cl, cd) = veh.aero.coefficients(st.cmd.alpha)?;
        let u1 = st.cmd.u1();
        let mut state_rhs = |_t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
            let x = LongitudinalState::from_array(y, 0.0);
            let q = k * atm.density(planet.altitude(x.r))? * x.v * x.v;
            Ok(longitudinal_rates_with_aero(&x, u1, q * cl, q * cd, planet.mu))
        };
        let x0 = st.state;
        let xm = LongitudinalState::from_array(&rk4_step(&mut state_rhs, x0.t, &x0.to_array(), 0.5 * st.h)?, x0.t + 0.5 * st.h);
        let x1 = traj.steps[i + 1].state;
        let rate = |x: &LongitudinalState, l: &[f64; 3]| -> Result<[f64; 3]> {
            let (rho, drho) = atm.density_with_slope(planet.altitude(x.r))?;
            let terms = AeroTerms { rho, drho, k, cl, cd };
            Ok(costate_rates(x, &CostateVector::from_array(*l), u1, &terms, planet.mu).to_array())
        };
        // Integrate in reversed time s = t1 - t, so d lambda / ds = -lambda'.
        let h = st.h;
        let l0 = lam.to_array();
        let neg = |v: [f64; 3]| v.map(|c| -c);
        let add = |a: &[f64; 3], c: f64, b: &[f64; 3]| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
        let k1 = neg(rate(&x1, &l0)?);
        let k2 = neg(rate(&xm, &add(&l0, 0.5 * h, &k1))?);
        let k3 = neg(rate(&xm, &add(&l0, 0.5 * h, &k2))?);
        let k4 = neg(rate(&x0, &add(&l0, h, &k3))?);
        let l1 = [0, 1, 2].map(|j| l0[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        lam = CostateVector::from_array(l1);
        out[i] = lam;
    }
    Ok(out)
}

/// Costates along an optimal pass from the transversality conditions
/// `lambda(tf) = dDV/dx + nu_a dr_a/dx + nu_r e_r` with `H(tf) = 0`.
///
/// With one anchor the apoapsis multiplier `nu_a` makes that switching
/// function vanish at the anchor time. With several, `nu_a` minimizes the
/// largest distance between an anchor time and the nearest crossing of its
/// function.
pub fn switching_trace(
    traj: &LongitudinalTrajectory,
    target: &TargetOrbit,
    anchors: &[Anchor],
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
) -> Result<Vec<TracePoint>> {
    if anchors.is_empty() {
        return Err(Error::InvalidConfig("switching trace needs at least one anchor".into()));
    }
    let last = traj.steps.last().expect("non-empty");
    let xf = last.state;
    let (_, ddv) = dv_with_gradient(&xf, target, planet.mu)?;
    let dra = apoapsis_gradient(&xf, planet.mu)?;
    let (cl, cd) = veh.aero.coefficients(last.cmd.alpha)?;
    let q = veh.accel_factor() * atm.density(planet.altitude(xf.r))? * xf.v * xf.v;
    let f = longitudinal_rates_with_aero(&xf, last.cmd.u1(), q * cl, q * cd, planet.mu);
    // Remove the component that would make H(tf) nonzero using e_r.
    let project = |l: [f64; 3]| {
        let c = CostateVector::from_array(l);
        let nu_r = -c.dot(&f) / f[0];
        CostateVector::new(c.lambda_r + nu_r, c.lambda_v, c.lambda_gamma)
    };
    let p = propagate_costates_backward(traj, project(ddv), planet, atm, veh)?;
    let qv = propagate_costates_backward(traj, project(dra), planet, atm, veh)?;
    // Switching functions are linear in the costates.
    let sf = |l: &[CostateVector]| -> Result<Vec<[f64; 3]>> {
        l.iter()
            .zip(&traj.steps)
            .map(|(l, st)| {
                let s = switching_functions(l.lambda_v, l.lambda_gamma, st.state.v, &veh.aero)?;
                Ok([s.h_sigma, s.h_alpha_down, s.h_alpha_up])
            })
            .collect()
    };
    let (hp, hq) = (sf(&p)?, sf(&qv)?);
    let times: Vec<f64> = traj.steps.iter().map(|s| s.state.t).collect();

    let anchor = |a: &Anchor| match *a {
        Anchor::Sigma(t) => (t, 0),
        Anchor::AlphaDown(t) => (t, 1),
        Anchor::AlphaUp(t) => (t, 2),
    };
    let exact = |a: &Anchor| -> Result<f64> {
        let (t, k) = anchor(a);
        let idx = times.iter().position(|&ti| ti >= t - 1e-9).unwrap_or(times.len() - 1);
        if hq[idx][k] == 0.0 {
            return Err(Error::NumericalDomain("apoapsis multiplier is indeterminate".into()));
        }
        Ok(-hp[idx][k] / hq[idx][k])
    };
    let nus = anchors.iter().map(exact).collect::<Result<Vec<_>>>()?;
    let nu = if nus.len() == 1 {
        nus[0]
    } else {
        let mismatch = |nu: f64| {
            anchors
                .iter()
                .map(|a| {
                    let (t, k) = anchor(a);
                    let vals: Vec<f64> = hp.iter().zip(&hq).map(|(x, y)| x[k] + nu * y[k]).collect();
                    crossings(&times, &vals).into_iter().map(|c| (c - t).abs()).fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        let lo = nus.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // The mismatch is piecewise smooth: scan, then polish around the best sample.
        let n = 200;
        let w = (hi - lo) / n as f64;
        let grid = (0..=n).map(|i| lo + w * i as f64).map(|x| (x, mismatch(x)));
        let (x0, _) = grid.min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        let (x, fx) = golden_section(mismatch, x0 - w, x0 + w, 1e-6 * w.abs().max(1e-30));
        if fx <= mismatch(x0) { x } else { x0 }
    };

    Ok(traj
        .steps
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let l = p[i].plus(nu, &qv[i]);
            TracePoint {
                t: st.state.t,
                r: st.state.r,
                v: st.state.v,
                gamma: st.state.gamma,
                lambda_r: l.lambda_r,
                lambda_v: l.lambda_v,
                lambda_gamma: l.lambda_gamma,
                h_sigma: hp[i][0] + nu * hq[i][0],
                h_alpha_down: hp[i][1] + nu * hq[i][1],
                h_alpha_up: hp[i][2] + nu * hq[i][2],
                sigma: st.cmd.sigma,
                alpha: st.cmd.alpha,
            }
        })
        .collect())
}

fn crossings(t: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..v.len() {
        let (a, b) = (v[i - 1], v[i]);
        if a == 0.0 && b != 0.0 {
            out.push(t[i - 1]);
        } else if a * b < 0.0 {
            out.push(t[i - 1] + (t[i] - t[i - 1]) * a / (a - b));
        }
    }
    out
}

/// Times where `value` changes sign along the trace, linearly interpolated.
pub fn zero_crossings(trace: &[TracePoint], value: impl Fn(&TracePoint) -> f64) -> Vec<f64> {
    let t: Vec<f64> = trace.iter().map(|p| p.t).collect();
    let v: Vec<f64> = trace.iter().map(value).collect();
    crossings(&t, &v)
}

pub fn write_switching_csv(path: &Path, trace: &[TracePoint]) -> Result<()> {
    use crate::harness::io::{fmt_f64, write_csv};
    write_csv(
        path,
        &["t", "r", "v", "gamma", "lambda_r", "lambda_v", "lambda_gamma", "h_alpha_up", "h_alpha_down", "h_sigma", "sigma", "alpha"],
        trace.iter().map(|p| {
            [p.t, p.r, p.v, p.gamma, p.lambda_r, p.lambda_v, p.lambda_gamma, p.h_alpha_up, p.h_alpha_down, p.h_sigma, p.sigma, p.alpha]
                .map(fmt_f64)
        }),
    )
}
