//! Rotating-planet 3-DoF equations of motion, the simplified longitudinal
//! model, fixed/adaptive Runge-Kutta integration and event-terminated
//! propagation.

use serde::{Deserialize, Serialize};

use crate::environment::{gravity, AtmosphereModel, PlanetModel};
use crate::error::{Error, Result};
use crate::vehicle::VehicleParams;

/// Standard gravity used for g-load reporting and triggers, m/s^2.
pub const G0: f64 = 9.80665;

const SINGULAR_COS: f64 = 1e-6;

/// Planet-relative spherical state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryState {
    /// Radius, m.
    pub r: f64,
    /// Longitude, rad.
    pub theta: f64,
    /// Latitude, rad.
    pub phi: f64,
    /// Planet-relative speed, m/s.
    pub v: f64,
    /// Planet-relative flight-path angle, rad.
    pub gamma: f64,
    /// Heading, rad clockwise from north, wrapped to [0, 2pi).
    pub psi: f64,
    /// Time, s.
    pub t: f64,
}

impl EntryState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.r, self.theta, self.phi, self.v, self.gamma, self.psi]
    }

    pub fn from_array(y: &[f64; 6], t: f64) -> Self {
        Self { r: y[0], theta: y[1], phi: y[2], v: y[3], gamma: y[4], psi: y[5].rem_euclid(std::f64::consts::TAU), t }
    }

    pub fn longitudinal(&self) -> LongitudinalState {
        LongitudinalState { r: self.r, v: self.v, gamma: self.gamma, t: self.t }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite()) && self.t.is_finite()
    }
}

/// `(r, V, gamma)` subsystem used by the simplified dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalState {
    pub r: f64,
    pub v: f64,
    pub gamma: f64,
    pub t: f64,
}

impl LongitudinalState {
    pub fn to_array(&self) -> [f64; 3] {
        [self.r, self.v, self.gamma]
    }

    pub fn from_array(y: &[f64; 3], t: f64) -> Self {
        Self { r: y[0], v: y[1], gamma: y[2], t }
    }
}

/// Bank angle (signed) and angle of attack, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub sigma: f64,
    pub alpha: f64,
}

impl ControlCommand {
    pub fn new(sigma: f64, alpha: f64) -> Self {
        Self { sigma, alpha }
    }

    pub fn u1(&self) -> f64 {
        self.sigma.to_radians().cos()
    }

    /// True when the command honors the vehicle's bank and alpha bounds.
    pub fn within(&self, veh: &VehicleParams) -> bool {
        let s = self.sigma.abs();
        let eps = 1e-9;
        s >= veh.sigma_min - eps
            && s <= veh.sigma_max + eps
            && self.alpha >= veh.alpha_min - eps
            && self.alpha <= veh.alpha_max + eps
    }
}

/// Shared read-only models for derivative evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Models<'a> {
    pub planet: &'a PlanetModel,
    pub atm: &'a AtmosphereModel,
    pub veh: &'a VehicleParams,
}

/// Aerodynamic lift and drag at a state, with the density used.
pub fn aero_at(state: &EntryState, cmd: &ControlCommand, m: &Models) -> Result<(f64, f64, f64)> {
    let rho = m.atm.density(m.planet.altitude(state.r))?;
    let (cl, cd) = m.veh.aero.coefficients(cmd.alpha)?;
    let q = m.veh.accel_factor() * rho * state.v * state.v;
    Ok((q * cl, q * cd, rho))
}

/// Rates of `(r, theta, phi, V, gamma, psi)` for the full rotating-planet model.
pub fn full_derivatives(
    state: &EntryState,
    cmd: &ControlCommand,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
) -> Result<[f64; 6]> {
    let m = Models { planet, atm, veh };
    let (lift, drag, _) = aero_at(state, cmd, &m)?;
    full_rates_with_aero(state, cmd.sigma, lift, drag, planet)
}

/// Full equations of motion given the aerodynamic accelerations.
///
/// The `Omega^2` term of the flight-path-angle rate is read as
/// `cos(gamma) cos(phi) + sin(gamma) cos(psi) sin(phi)`.
pub fn full_rates_with_aero(
    state: &EntryState,
    sigma_deg: f64,
    lift: f64,
    drag: f64,
    planet: &PlanetModel,
) -> Result<[f64; 6]> {
    full_rates_with_bank(state, sigma_deg.to_radians().sin_cos(), lift, drag, planet)
}

/// [`full_rates_with_aero`] with the bank angle given as `(sin, cos)`.
pub fn full_rates_with_bank(
    state: &EntryState,
    (ss, cs): (f64, f64),
    lift: f64,
    drag: f64,
    planet: &PlanetModel,
) -> Result<[f64; 6]> {
    let EntryState { r, phi, v, gamma, psi, .. } = *state;
    if !(v > 0.0) {
        return Err(Error::SingularCoordinates("speed must be positive"));
    }
    let (sg, cg) = gamma.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sh, ch) = psi.sin_cos();
    if cg.abs() < SINGULAR_COS {
        return Err(Error::SingularCoordinates("|flight-path angle| reached 90 deg"));
    }
    if cp.abs() < SINGULAR_COS {
        return Err(Error::SingularCoordinates("|latitude| reached 90 deg"));
    }
    let (g_r, g_phi) = gravity(planet, r, phi);
    let w = planet.omega;

    let r_dot = v * sg;
    let theta_dot = v * cg * sh / (r * cp);
    let phi_dot = v * cg * ch / r;
    let v_dot = -drag - g_r * sg - g_phi * cg * ch + w * w * r * cp * (sg * cp - cg * sp * ch);
    let gamma_dot = (lift * cs + (v * v / r - g_r) * cg + g_phi * sg * ch + 2.0 * w * v * cp * sh
        + w * w * r * cp * (cg * cp + sg * ch * sp))
        / v;
    let psi_dot = (lift * ss / cg + v * v / r * cg * sh * (sp / cp) + g_phi * sh / cg
        - 2.0 * w * v * (sg / cg * ch * cp - sp)
        + w * w * r / cg * sh * sp * cp)
        / v;
    Ok([r_dot, theta_dot, phi_dot, v_dot, gamma_dot, psi_dot])
}

/// Simplified longitudinal rates (non-rotating, inverse-square gravity).
pub fn longitudinal_derivatives(
    state: &LongitudinalState,
    u1: f64,
    alpha_deg: f64,
    planet: &PlanetModel,
    atm: &AtmosphereModel,
    veh: &VehicleParams,
) -> Result<[f64; 3]> {
    if !(state.v > 0.0) {
        return Err(Error::SingularCoordinates("speed must be positive"));
    }
    let rho = atm.density(planet.altitude(state.r))?;
    let (cl, cd) = veh.aero.coefficients(alpha_deg)?;
    let q = veh.accel_factor() * rho * state.v * state.v;
    Ok(longitudinal_rates_with_aero(state, u1, q * cl, q * cd, planet.mu))
}

pub(crate) fn longitudinal_rates_with_aero(s: &LongitudinalState, u1: f64, lift: f64, drag: f64, mu: f64) -> [f64; 3] {
    let (sg, cg) = s.gamma.sin_cos();
    [
        s.v * sg,
        -drag - mu * sg / (s.r * s.r),
        (lift * u1 + (s.v * s.v - mu / s.r) * cg / s.r) / s.v,
    ]
}

// ---------------------------------------------------------------------------
// Integration

/// Numerical integration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: IntegratorMethod,
    /// Fixed step (s) for `rk4_fixed`.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest adaptive step, s.
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    Rk4Fixed,
    Rk45Adaptive,
}

impl IntegratorConfig {
    pub fn truth_default() -> Self {
        Self { method: IntegratorMethod::Rk45Adaptive, dt: 1.0, rel_tol: 1e-8, abs_tol: 1e-8, max_step: 20.0 }
    }

    pub fn rk4(dt: f64) -> Self {
        Self { method: IntegratorMethod::Rk4Fixed, dt, rel_tol: 1e-8, abs_tol: 1e-8, max_step: dt }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("integrator settings must be positive: {self:?}")))
        }
    }
}

/// Classic fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(y, h, &k3))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, x: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * x[i];
    }
    out
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order solution and the
/// embedded error estimate.
pub fn dp45_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = DP_A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(t + DP_C[s] * h, &ys)?;
    }
    let mut y_new = *y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for i in 0..N {
            y_new[i] += h * DP_B[s] * k[s][i];
            err[i] += h * DP_E[s] * k[s][i];
        }
    }
    Ok((y_new, err))
}

/// Adaptive Dormand-Prince integration from `t0` to `t1`. Returns the final
/// state and the number of accepted steps.
pub fn integrate_adaptive<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    cfg: &IntegratorConfig,
    h_init: &mut f64,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut t = t0;
    let mut y = y0;
    while t < t1 {
        let (y_new, h_used) = adaptive_step(f, t, &y, t1 - t, cfg, h_init)?;
        t += h_used;
        y = y_new;
    }
    Ok(y)
}

/// Takes one accepted adaptive step no longer than `h_max_here`; updates
/// `h_next` with the suggested next step.
fn adaptive_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    h_max_here: f64,
    cfg: &IntegratorConfig,
    h_next: &mut f64,
) -> Result<([f64; N], f64)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let h_min = 1e-9 * t.abs().max(1.0);
    let mut h = h_next.min(cfg.max_step).min(h_max_here);
    loop {
        if h < h_min && h < h_max_here {
            return Err(Error::NumericalDomain(format!("step size underflow at t = {t}")));
        }
        let (y_new, err) = dp45_step(f, t, y, h)?;
        let mut norm = 0.0;
        for i in 0..N {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            norm += (err[i] / sc).powi(2);
        }
        let norm = (norm / N as f64).sqrt();
        if !norm.is_finite() {
            h *= 0.25;
            continue;
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        if norm <= 1.0 {
            // Keep the suggestion independent of a step truncated by a breakpoint.
            if h < h_max_here || *h_next <= h {
                *h_next = (h * factor).min(cfg.max_step);
            }
            return Ok((y_new, h));
        }
        h *= factor.min(0.9);
    }
}

// ---------------------------------------------------------------------------
// Events and propagation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Aerodynamic acceleration magnitude rises above `threshold` g.
    GLoadExceeds,
    /// Radius rises through `threshold` (m) while climbing.
    AtmosphericExit,
    /// Radius falls through `threshold` (m).
    GroundImpact,
    /// Time reaches `threshold` (s).
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub threshold: f64,
}

impl EventSpec {
    pub fn g_load(g: f64) -> Self {
        Self { kind: EventKind::GLoadExceeds, threshold: g }
    }
    pub fn exit(planet: &PlanetModel) -> Self {
        Self { kind: EventKind::AtmosphericExit, threshold: planet.r_atm }
    }
    pub fn impact(radius: f64) -> Self {
        Self { kind: EventKind::GroundImpact, threshold: radius }
    }
    pub fn time_limit(t: f64) -> Self {
        Self { kind: EventKind::TimeLimit, threshold: t }
    }

    /// Signed event function; the event fires when it crosses from negative
    /// to non-negative.
    fn value(&self, s: &EntryState, g_load: f64) -> f64 {
        match self.kind {
            EventKind::GLoadExceeds => g_load - self.threshold,
            EventKind::AtmosphericExit => s.r - self.threshold,
            EventKind::GroundImpact => self.threshold - s.r,
            EventKind::TimeLimit => s.t - self.threshold,
        }
    }
}

/// Source of commands for [`propagate`]. Commands are held constant between
/// updates; the propagator never steps across an update time.
pub trait ControlLaw {
    fn command(&mut self, state: &EntryState, sensed_accel: f64) -> ControlCommand;

    /// Time of the next command update after one issued at `t`.
    fn next_update(&self, _t: f64) -> f64 {
        f64::INFINITY
    }
}

impl ControlLaw for ControlCommand {
    fn command(&mut self, _: &EntryState, _: f64) -> ControlCommand {
        *self
    }
}

/// Adapts a closure `state -> command`, re-evaluated every `period` seconds.
pub struct PeriodicLaw<F> {
    pub law: F,
    pub period: f64,
}

impl<F: FnMut(&EntryState) -> ControlCommand> ControlLaw for PeriodicLaw<F> {
    fn command(&mut self, state: &EntryState, _: f64) -> ControlCommand {
        (self.law)(state)
    }
    fn next_update(&self, t: f64) -> f64 {
        t + self.period
    }
}

/// One recorded trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub state: EntryState,
    pub cmd: ControlCommand,
    pub rho: f64,
    /// Aerodynamic acceleration magnitude in g.
    pub g_load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Event that terminated propagation.
    pub event: EventSpec,
}

impl Trajectory {
    pub fn final_state(&self) -> &EntryState {
        &self.points.last().expect("trajectory is never empty").state
    }

    pub fn peak_g(&self) -> f64 {
        self.points.iter().map(|p| p.g_load).fold(0.0, f64::max)
    }

    /// Writes one row per sample: state, commands, density and g-load.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use crate::harness::io::{fmt_f64, write_csv};
        write_csv(
            path,
            &["t", "r", "theta", "phi", "v", "gamma", "psi", "sigma_cmd", "alpha_cmd", "rho", "g_load"],
            self.points.iter().map(|p| {
                let s = &p.state;
                [s.t, s.r, s.theta, s.phi, s.v, s.gamma, s.psi, p.cmd.sigma, p.cmd.alpha, p.rho, p.g_load].map(fmt_f64)
            }),
        )
    }
}

/// Aerodynamic acceleration magnitude (m/s^2) and density at `state`.
pub fn sensed_accel(state: &EntryState, cmd: &ControlCommand, m: &Models) -> Result<(f64, f64)> {
    let (l, d, rho) = aero_at(state, cmd, m)?;
    Ok((l.hypot(d), rho))
}

/// Propagates the full dynamics under `law` until the first event fires.
///
/// A `time_limit` event must be present. Event times are located by bisection
/// on the step to better than 1e-6 s.
pub fn propagate(
    initial: EntryState,
    law: &mut dyn ControlLaw,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
    models: &Models,
) -> Result<Trajectory> {
    let t_end = events
        .iter()
        .filter(|e| e.kind == EventKind::TimeLimit)
        .map(|e| e.threshold)
        .fold(f64::NAN, f64::min);
    if !t_end.is_finite() {
        return Err(Error::InvalidConfig("propagation needs a time_limit event".into()));
    }
    let diverged = |s: &EntryState, why: String| Error::Diverged { last: Box::new(*s), reason: why };

    let mut state = initial;
    let (sensed, rho) = sensed_accel(&state, &ControlCommand::new(0.0, models.veh.alpha_min), models)
        .map_err(|e| diverged(&state, e.to_string()))?;
    let mut cmd = law.command(&state, sensed);
    let mut next_update = law.next_update(state.t);
    let (a0, rho0) = sensed_accel(&state, &cmd, models).unwrap_or((sensed, rho));
    let mut points = vec![TrajectoryPoint { state, cmd, rho: rho0, g_load: a0 / G0 }];
    let mut h_next = cfg.dt.min(cfg.max_step);

    loop {
        if state.t >= next_update - 1e-12 {
            let (a, _) = sensed_accel(&state, &cmd, models).map_err(|e| diverged(&state, e.to_string()))?;
            cmd = law.command(&state, a);
            next_update = law.next_update(state.t);
            if let Some(p) = points.last_mut() {
                p.cmd = cmd;
            }
        }
        let horizon = next_update.min(t_end) - state.t;
        if horizon <= 0.0 {
            // Time limit reached exactly.
            let ev = events.iter().find(|e| e.kind == EventKind::TimeLimit).copied().expect("checked above");
            return Ok(Trajectory { points, event: ev });
        }
        let mut rhs = |_t: f64, y: &[f64; 6]| -> Result<[f64; 6]> {
            let s = EntryState::from_array(y, 0.0);
            full_derivatives(&s, &cmd, models.planet, models.atm, models.veh)
        };
        let y0 = state.to_array();
        let (y1, h) = match cfg.method {
            IntegratorMethod::Rk4Fixed => {
                let h = cfg.dt.min(horizon);
                (rk4_step(&mut rhs, state.t, &y0, h), h)
            }
            IntegratorMethod::Rk45Adaptive => match adaptive_step(&mut rhs, state.t, &y0, horizon, cfg, &mut h_next) {
                Ok((y, h)) => (Ok(y), h),
                Err(e) => (Err(e), 0.0),
            },
        };
        let y1 = y1.map_err(|e| diverged(&state, e.to_string()))?;
        let t1 = if (state.t + h - next_update.min(t_end)).abs() < 1e-9 { next_update.min(t_end) } else { state.t + h };
        let new_state = EntryState::from_array(&y1, t1);
        if !new_state.is_finite() || !(new_state.r > 0.0) || !(new_state.v > 0.0) {
            return Err(diverged(&state, "non-finite or unphysical state".into()));
        }
        let g_of = |s: &EntryState| -> f64 { sensed_accel(s, &cmd, models).map(|(a, _)| a / G0).unwrap_or(f64::INFINITY) };
        let g_prev = points.last().map(|p| p.g_load).unwrap_or(0.0);
        let g_new = g_of(&new_state);

        let fired = events
            .iter()
            .filter(|e| e.value(&state, g_prev) < 0.0 && e.value(&new_state, g_new) >= 0.0)
            .filter(|e| e.kind != EventKind::AtmosphericExit || new_state.gamma > 0.0)
            .copied()
            .collect::<Vec<_>>();
        if !fired.is_empty() {
            // Locate the earliest crossing among the fired events.
            let mut best: Option<(f64, EntryState, EventSpec)> = None;
            for ev in fired {
                let (tau, s) = locate_event(&mut rhs, &state, h, &ev, cfg, &g_of)
                    .map_err(|e| diverged(&state, e.to_string()))?;
                if best.as_ref().is_none_or(|b| tau < b.0) {
                    best = Some((tau, s, ev));
                }
            }
            let (_, s, ev) = best.expect("non-empty");
            let (a, rho) = sensed_accel(&s, &cmd, models).unwrap_or((f64::NAN, f64::NAN));
            points.push(TrajectoryPoint { state: s, cmd, rho, g_load: a / G0 });
            return Ok(Trajectory { points, event: ev });
        }
        state = new_state;
        let (a, rho) = sensed_accel(&state, &cmd, models).map_err(|e| diverged(&state, e.to_string()))?;
        points.push(TrajectoryPoint { state, cmd, rho, g_load: a / G0 });
    }
}

fn locate_event<F, G>(
    rhs: &mut F,
    start: &EntryState,
    h: f64,
    ev: &EventSpec,
    cfg: &IntegratorConfig,
    g_of: &G,
) -> Result<(f64, EntryState)>
where
    F: FnMut(f64, &[f64; 6]) -> Result<[f64; 6]>,
    G: Fn(&EntryState) -> f64,
{
    let y0 = start.to_array();
    let mut advance = |tau: f64| -> Result<EntryState> {
        let y = match cfg.method {
            IntegratorMethod::Rk4Fixed => rk4_step(rhs, start.t, &y0, tau)?,
            IntegratorMethod::Rk45Adaptive => dp45_step(rhs, start.t, &y0, tau)?.0,
        };
        Ok(EntryState::from_array(&y, start.t + tau))
    };
    let (mut lo, mut hi) = (0.0, h);
    let mut hi_state = advance(h)?;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let s = advance(mid)?;
        if ev.value(&s, g_of(&s)) >= 0.0 {
            hi = mid;
            hi_state = s;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::AeroModel;

    fn vacuum() -> AtmosphereModel {
        AtmosphereModel::exponential(1e-300, 1.0, -1e12, 1e12)
    }

    #[test]
    fn circular_orbit_equilibrium() {
        let planet = PlanetModel { omega: 0.0, ..PlanetModel::uranus() };
        let veh = VehicleParams::default_probe();
        let r = planet.r_eq + 2_000e3;
        let s = EntryState { r, theta: 0.1, phi: 0.2, v: (planet.mu / r).sqrt(), gamma: 0.0, psi: 1.0, t: 0.0 };
        let d = full_derivatives(&s, &ControlCommand::new(15.0, -20.0), &planet, &vacuum(), &veh).unwrap();
        assert!(d[3].abs() < 1e-12 && d[4].abs() < 1e-15, "{d:?}");
    }

    #[test]
    fn vacuum_speed_rate_is_gravity_projection() {
        let planet = PlanetModel { omega: 0.0, ..PlanetModel::uranus() };
        let veh = VehicleParams::default_probe();
        let s = EntryState { r: 2.6e7, theta: 0.0, phi: -0.3, v: 2.1e4, gamma: -0.2, psi: 2.0, t: 0.0 };
        let d = full_derivatives(&s, &ControlCommand::new(90.0, -20.0), &planet, &vacuum(), &veh).unwrap();
        assert_eq!(d[3], -(planet.mu / (s.r * s.r)) * s.gamma.sin());
    }

    #[test]
    fn singular_coordinates_abort() {
        let planet = PlanetModel::uranus();
        let veh = VehicleParams::default_probe();
        let s = EntryState { r: 2.6e7, theta: 0.0, phi: std::f64::consts::FRAC_PI_2, v: 2.1e4, gamma: -0.2, psi: 2.0, t: 0.0 };
        let r = full_derivatives(&s, &ControlCommand::new(90.0, -20.0), &planet, &vacuum(), &veh);
        assert!(matches!(r, Err(Error::SingularCoordinates(_))));
    }

    #[test]
    fn longitudinal_bank_sign_changes_only_gamma_rate() {
        let planet = PlanetModel::uranus();
        let atm = AtmosphereModel::uranus_nominal();
        let veh = VehicleParams::default_probe().with_aero(AeroModel::linear(0.5, 1.7, -0.9, 0.2));
        let s = LongitudinalState { r: planet.r_eq + 300e3, v: 2.0e4, gamma: -0.05, t: 0.0 };
        let up = longitudinal_derivatives(&s, 1.0, -18.0, &planet, &atm, &veh).unwrap();
        let down = longitudinal_derivatives(&s, -1.0, -18.0, &planet, &atm, &veh).unwrap();
        let rho = atm.density(300e3).unwrap();
        let (lift, _) = crate::vehicle::aero_accel(&veh, rho, s.v, -18.0).unwrap();
        assert_eq!(up[0], down[0]);
        assert_eq!(up[1], down[1]);
        assert!(((up[2] - down[2]) - 2.0 * lift / s.v).abs() < 1e-15);
        let zero_v = LongitudinalState { v: 0.0, ..s };
        assert!(longitudinal_derivatives(&zero_v, 1.0, -18.0, &planet, &atm, &veh).is_err());
    }

    #[test]
    fn rk4_step_exact_for_cubic_time_polynomial() {
        let mut f = |t: f64, _y: &[f64; 1]| -> Result<[f64; 1]> { Ok([3.0 * t * t]) };
        let y = rk4_step(&mut f, 1.0, &[1.0], 0.5).unwrap();
        assert!((y[0] - 1.5f64.powi(3)).abs() < 1e-14);
    }
}
