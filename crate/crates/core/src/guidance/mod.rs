//! Closed-loop aerocapture guidance: ABAMGuid (three-switch bank and
//! angle-of-attack modulation) and the FNPAG bank-only baseline.

pub mod filter;
pub mod predictor;
pub mod solvers;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use filter::{update_filter, DensityFilterState};
pub use predictor::{predict_apoapsis, GuidanceModels, Prediction, PredictorConfig, ProfileMode};
pub use solvers::{nelder_mead, phase3_newton, phase4_brent, NelderMeadConfig, SolverDiagnostics};

use crate::dynamics::{ControlCommand, ControlLaw, EntryState, G0};
use crate::error::{Error, Result};
use crate::numerics::brent_root_with;
use crate::profiles::{BangBangProfile, SwitchingSchedule};
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidancePhase {
    PrePhase1,
    Phase1,
    Phase2,
    Phase3,
    Phase4,
    Exited,
}

impl GuidancePhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            GuidancePhase::PrePhase1 => "pre_phase1",
            GuidancePhase::Phase1 => "phase1",
            GuidancePhase::Phase2 => "phase2",
            GuidancePhase::Phase3 => "phase3",
            GuidancePhase::Phase4 => "phase4",
            GuidancePhase::Exited => "exited",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Abamguid,
    Fnpag,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Abamguid => "abamguid",
            Algorithm::Fnpag => "fnpag",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abamguid" => Ok(Algorithm::Abamguid),
            "fnpag" => Ok(Algorithm::Fnpag),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub algorithm: Algorithm,
    /// Guidance call period, s.
    pub period: f64,
    /// Sensed acceleration (g) that activates phase 1.
    pub trigger_g: f64,
    pub nelder_mead: NelderMeadConfig,
    /// Secant stopping threshold on `|z dz/dt|`, m^2/s.
    pub eps_nr: f64,
    pub nr_max_iter: usize,
    /// Brent tolerance on the phase-4 bank angle, deg.
    pub brent_xtol: f64,
    pub brent_max_iter: usize,
    pub filter_enabled: bool,
    pub filter_gain: f64,
    /// A committed solution whose predicted apoapsis error is within this
    /// fraction of the target is kept without re-solving.
    pub resolve_tol: f64,
    /// Angle of attack flown by FNPAG, deg. `None` uses the vehicle's alpha_min.
    pub fnpag_alpha: Option<f64>,
    pub predictor: PredictorConfig,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Abamguid,
            period: 1.0,
            trigger_g: 0.1,
            // Cost spread of 1e10 m^2 is about 140 km of apoapsis error.
            nelder_mead: NelderMeadConfig { eps_nm: 1e10, ..NelderMeadConfig::default() },
            eps_nr: 1e9,
            nr_max_iter: 20,
            brent_xtol: 1e-3,
            brent_max_iter: 60,
            filter_enabled: true,
            filter_gain: 0.1,
            resolve_tol: 1e-3,
            fnpag_alpha: None,
            predictor: PredictorConfig::default(),
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        let nm = &self.nelder_mead;
        let ok = self.period > 0.0
            && self.trigger_g >= 0.0
            && nm.init_step > 0.0
            && nm.eps_nm > 0.0
            && self.eps_nr > 0.0
            && self.brent_xtol > 0.0
            && (0.0..=1.0).contains(&self.filter_gain)
            && self.resolve_tol >= 0.0
            && self.predictor.dt > 0.0
            && self.predictor.horizon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("guidance settings out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceState {
    pub phase: GuidancePhase,
    pub schedule: SwitchingSchedule,
    /// Constant bank of the final phase, deg.
    pub sigma4: f64,
    pub filter: DensityFilterState,
    pub last_solver: SolverDiagnostics,
    /// Latest predicted apoapsis error, m.
    pub predicted_ra_error: f64,
    /// Latest predicted end of the pass, s.
    pub t_exit_estimate: f64,
    /// Command issued by the previous call.
    pub last_cmd: ControlCommand,
}

impl GuidanceState {
    pub fn new(cfg: &GuidanceConfig, models: &GuidanceModels) -> Self {
        Self {
            phase: GuidancePhase::PrePhase1,
            schedule: SwitchingSchedule::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            sigma4: models.veh.sigma_max,
            filter: DensityFilterState::new(cfg.filter_gain),
            last_solver: SolverDiagnostics::default(),
            predicted_ra_error: f64::NAN,
            t_exit_estimate: f64::NAN,
            last_cmd: ControlCommand::new(models.veh.sigma_min, models.veh.alpha_min),
        }
    }
}

/// One guidance call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelemetryRow {
    pub t: f64,
    pub phase: GuidancePhase,
    pub t_s1: f64,
    pub t_s2: f64,
    pub t_s3: f64,
    pub sigma4: f64,
    pub sigma_cmd: f64,
    pub alpha_cmd: f64,
    pub predicted_ra_error: f64,
    pub ratio_est: f64,
    pub nm_iters: usize,
    pub converged: bool,
}

pub fn write_telemetry_csv(path: &Path, rows: &[TelemetryRow]) -> Result<()> {
    use crate::harness::io::{fmt_f64, write_csv};
    write_csv(
        path,
        &["t", "phase", "t_s1", "t_s2", "t_s3", "sigma4", "sigma_cmd", "alpha_cmd", "predicted_ra_error", "ratio_est", "nm_iters", "converged"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                r.phase.as_str().to_string(),
                fmt_f64(r.t_s1),
                fmt_f64(r.t_s2),
                fmt_f64(r.t_s3),
                fmt_f64(r.sigma4),
                fmt_f64(r.sigma_cmd),
                fmt_f64(r.alpha_cmd),
                fmt_f64(r.predicted_ra_error),
                fmt_f64(r.ratio_est),
                r.nm_iters.to_string(),
                r.converged.to_string(),
            ]
        }),
    )
}

/// Half the squared apoapsis error, m^2.
pub fn cost_of_error(err: f64) -> f64 {
    0.5 * err * err
}

/// Predicted apoapsis error (m) of flying `mode` from `current`. A
/// failed prediction counts as a dive, `-r_a*`.
pub fn apoapsis_error(current: &EntryState, mode: &ProfileMode, ratio: f64, models: &GuidanceModels, cfg: &GuidanceConfig) -> f64 {
    match predict_apoapsis(current, mode, ratio, models, &cfg.predictor) {
        Ok(p) => p.r_a - models.target.r_a_target,
        Err(_) => -models.target.r_a_target,
    }
}

/// Targeting cost of the bang-bang profile with `schedule` flown from
/// `current`. Out-of-order switch times cost the Nelder-Mead penalty.
pub fn targeting_cost(
    current: &EntryState,
    schedule: SwitchingSchedule,
    ratio: f64,
    models: &GuidanceModels,
    cfg: &GuidanceConfig,
) -> f64 {
    if !schedule.is_ordered() {
        return cfg.nelder_mead.penalty;
    }
    cost_of_error(apoapsis_error(current, &ProfileMode::schedule(schedule, &models.veh), ratio, models, cfg))
}

/// Shared per-call context.
struct Ctx<'a> {
    cfg: &'a GuidanceConfig,
    models: &'a GuidanceModels,
    state: &'a EntryState,
    ratio: f64,
}

impl Ctx<'_> {
    fn predict(&self, mode: &ProfileMode) -> Result<Prediction> {
        predict_apoapsis(self.state, mode, self.ratio, self.models, &self.cfg.predictor)
    }

    fn error(&self, mode: &ProfileMode) -> f64 {
        apoapsis_error(self.state, mode, self.ratio, self.models, self.cfg)
    }

    /// Errors this large come from the sentinel cap or a dive and carry no
    /// slope information.
    fn saturated(&self, err: f64) -> bool {
        err.abs() > 0.5 * self.models.target.r_a_target
    }

    fn within_deadband(&self, err: f64) -> bool {
        err.abs() <= self.cfg.resolve_tol * self.models.target.r_a_target
    }

    fn profile(&self, s: SwitchingSchedule) -> ProfileMode {
        ProfileMode::schedule(s, &self.models.veh)
    }

    /// Bank-only profile at a fixed angle of attack switching at `ts`.
    fn fnpag_profile(&self, ts: f64) -> ProfileMode {
        let veh = &self.models.veh;
        let a = self.cfg.fnpag_alpha.unwrap_or(veh.alpha_min);
        ProfileMode::Schedule(BangBangProfile {
            schedule: SwitchingSchedule::immediate(ts),
            sigma_lo: veh.sigma_min,
            sigma_hi: veh.sigma_max,
            alpha_lo: a,
            alpha_hi: a,
        })
    }

    fn sensed_model(&self, cmd: &ControlCommand) -> f64 {
        let m = self.models;
        let Ok(rho) = m.atm.density(m.planet.altitude(self.state.r)) else { return 0.0 };
        let Ok((cl, cd)) = m.veh.aero.coefficients(cmd.alpha) else { return 0.0 };
        m.veh.accel_factor() * rho * self.state.v * self.state.v * cl.hypot(cd)
    }

    /// End of a full lift-up pass from now, used to size the initial guess.
    fn duration_estimate(&self) -> f64 {
        let veh = &self.models.veh;
        let t0 = self.state.t;
        match self.predict(&ProfileMode::Constant(ControlCommand::new(veh.sigma_min, veh.alpha_min))) {
            Ok(p) if p.t_end > t0 => p.t_end - t0,
            _ => 0.5 * self.cfg.predictor.horizon,
        }
    }
}

/// Stretches the free switch times about now until the predicted error
/// changes sign, so that the simplex starts where the error has a slope.
/// Stretch factor zero flies the final segment from now on; the largest
/// factor pushes every free switch past the expected exit.
fn seed_schedule(ctx: &Ctx, gd: &mut GuidanceState, frozen: usize) {
    let t_now = ctx.state.t;
    let base = gd.schedule.to_array();
    let span = if gd.t_exit_estimate > t_now { gd.t_exit_estimate - t_now } else { ctx.duration_estimate() };
    let mut offs = [0.2 * span, 0.5 * span, 0.7 * span];
    if base[2] - t_now > 1.0 {
        for (o, b) in offs.iter_mut().zip(base) {
            *o = (b - t_now).max(0.0);
        }
    }
    let stretch = |lam: f64| {
        let mut s = base;
        for i in frozen..3 {
            s[i] = t_now + lam * offs[i];
        }
        SwitchingSchedule::from_array(s)
    };
    let lam_max = 1.2 * span / offs[2].max(1.0);
    let err = |lam: f64| ctx.error(&ctx.profile(stretch(lam)));
    let (e0, e1) = (err(0.0), err(lam_max));
    if let Some(sol) = brent_root_with(err, 0.0, lam_max, e0, e1, 1e-3, 40) {
        gd.schedule = stretch(sol.x);
    }
}

/// Nelder-Mead over the free switch times with the earlier ones frozen.
fn solve_schedule(ctx: &Ctx, gd: &mut GuidanceState, frozen: usize) {
    if ctx.saturated(gd.predicted_ra_error) {
        seed_schedule(ctx, gd, frozen);
    }
    let t_now = ctx.state.t;
    let base = gd.schedule.to_array();
    let nm = ctx.cfg.nelder_mead;
    let assemble = |x: &[f64]| {
        let mut s = base;
        s[frozen..].copy_from_slice(x);
        SwitchingSchedule::from_array(s)
    };
    let feasible = |s: &SwitchingSchedule| s.is_ordered() && s.to_array()[frozen] >= t_now;
    let cost = |x: &[f64]| {
        let s = assemble(x);
        if s.to_array()[frozen] < t_now {
            return nm.penalty;
        }
        targeting_cost(ctx.state, s, ctx.ratio, ctx.models, ctx.cfg)
    };
    let mut x0: Vec<f64> = base[frozen..].to_vec();
    // Pull a stale guess back into the feasible set before solving.
    let mut lo = t_now;
    for v in x0.iter_mut() {
        *v = v.max(lo);
        lo = *v;
    }
    let (x, diag) = nelder_mead(cost, &x0, &nm);
    let s = assemble(&x);
    if feasible(&s) && diag.final_cost < nm.penalty {
        gd.schedule = s;
        gd.predicted_ra_error = ctx.error(&ctx.profile(s));
    }
    gd.last_solver = diag;
}

fn solve_sigma4(ctx: &Ctx, gd: &mut GuidanceState, alpha: f64) {
    let veh = &ctx.models.veh;
    let err = |s: f64| ctx.error(&ProfileMode::Constant(ControlCommand::new(s, alpha)));
    let (s, diag) = phase4_brent(gd.sigma4, err, (veh.sigma_min, veh.sigma_max), ctx.cfg.brent_xtol, ctx.cfg.brent_max_iter);
    gd.sigma4 = s;
    gd.predicted_ra_error = err(s);
    gd.last_solver = diag;
}

/// Secant solve of one switch time (index `which` of the schedule); later
/// switches move with it.
fn solve_switch(ctx: &Ctx, gd: &mut GuidanceState, which: usize, profile: impl Fn(&Ctx, SwitchingSchedule) -> ProfileMode) {
    let t_now = ctx.state.t;
    let base = gd.schedule.to_array();
    let assemble = |t: f64| {
        let mut s = base;
        for v in s[which..].iter_mut() {
            *v = t;
        }
        SwitchingSchedule::from_array(s)
    };
    let hi = if gd.t_exit_estimate.is_finite() && gd.t_exit_estimate > t_now { gd.t_exit_estimate } else { t_now + ctx.duration_estimate() };
    let z = |t: f64| ctx.error(&profile(ctx, assemble(t)));
    let (mut t, mut diag) = phase3_newton(base[which].clamp(t_now, hi), z, (t_now, hi), ctx.cfg.eps_nr, ctx.cfg.nr_max_iter);
    if !diag.converged {
        // The secant stalls on saturated plateaus; fall back to bracketing.
        let (z_lo, z_hi) = (z(t_now), z(hi));
        if let Some(sol) = brent_root_with(z, t_now, hi, z_lo, z_hi, 0.05, 60) {
            t = sol.x;
            diag = SolverDiagnostics {
                iterations: diag.iterations + sol.iterations,
                converged: sol.converged,
                final_cost: 0.5 * sol.fx * sol.fx,
            };
        }
    }
    gd.schedule = assemble(t);
    gd.predicted_ra_error = ctx.error(&profile(ctx, gd.schedule));
    gd.last_solver = diag;
}

fn refresh_exit_estimate(ctx: &Ctx, gd: &mut GuidanceState, mode: &ProfileMode) -> f64 {
    match ctx.predict(mode) {
        Ok(p) => {
            gd.t_exit_estimate = p.t_end;
            p.r_a - ctx.models.target.r_a_target
        }
        Err(_) => -ctx.models.target.r_a_target,
    }
}

/// Shared call wrapper: holds the last command once the vehicle has left the
/// sensible atmosphere and records the issued command.
fn guarded(
    state: &EntryState,
    sensed_accel: f64,
    gd: &GuidanceState,
    models: &GuidanceModels,
    cfg: &GuidanceConfig,
    inner: StepFn,
) -> (ControlCommand, GuidanceState) {
    let mut gd = *gd;
    if gd.phase == GuidancePhase::Exited {
        return (gd.last_cmd, gd);
    }
    if gd.phase > GuidancePhase::PrePhase1 && state.gamma > 0.0 && sensed_accel < cfg.predictor.quiet_accel {
        gd.phase = GuidancePhase::Exited;
        return (gd.last_cmd, gd);
    }
    let (cmd, mut gd) = inner(state, sensed_accel, &gd, models, cfg);
    gd.last_cmd = cmd;
    (cmd, gd)
}

type StepFn = fn(&EntryState, f64, &GuidanceState, &GuidanceModels, &GuidanceConfig) -> (ControlCommand, GuidanceState);

/// One ABAMGuid call: returns the command to hold until the next call.
pub fn abamguid_step(
    state: &EntryState,
    sensed_accel: f64,
    gd: &GuidanceState,
    models: &GuidanceModels,
    cfg: &GuidanceConfig,
) -> (ControlCommand, GuidanceState) {
    guarded(state, sensed_accel, gd, models, cfg, abamguid_inner)
}

fn abamguid_inner(
    state: &EntryState,
    sensed_accel: f64,
    gd: &GuidanceState,
    models: &GuidanceModels,
    cfg: &GuidanceConfig,
) -> (ControlCommand, GuidanceState) {
    let mut gd = *gd;
    let veh = &models.veh;
    let t = state.t;
    if gd.phase == GuidancePhase::PrePhase1 {
        if sensed_accel / G0 <= cfg.trigger_g {
            return (ControlCommand::new(veh.sigma_min, veh.alpha_min), gd);
        }
        gd.phase = GuidancePhase::Phase1;
        let ctx = Ctx { cfg, models, state, ratio: gd.filter.ratio_est };
        let dur = ctx.duration_estimate();
        gd.schedule = SwitchingSchedule::new(t + 0.2 * dur, t + 0.5 * dur, t + 0.7 * dur);
        gd.t_exit_estimate = t + dur;
    }
    if cfg.filter_enabled {
        let ctx = Ctx { cfg, models, state, ratio: 1.0 };
        gd.filter = update_filter(gd.filter, sensed_accel, ctx.sensed_model(&gd.last_cmd));
    }
    let ctx = Ctx { cfg, models, state, ratio: gd.filter.ratio_est };

    advance(&mut gd, t, t + cfg.period);

    match gd.phase {
        GuidancePhase::Phase1 | GuidancePhase::Phase2 => {
            let frozen = if gd.phase == GuidancePhase::Phase1 { 0 } else { 1 };
            let mode = ctx.profile(gd.schedule);
            let err = refresh_exit_estimate(&ctx, &mut gd, &mode);
            gd.predicted_ra_error = err;
            if !ctx.within_deadband(err) {
                solve_schedule(&ctx, &mut gd, frozen);
            }
            advance(&mut gd, t, t + cfg.period);
        }
        GuidancePhase::Phase3 => {
            let mode = ctx.profile(gd.schedule);
            let err = refresh_exit_estimate(&ctx, &mut gd, &mode);
            gd.predicted_ra_error = err;
            if !ctx.within_deadband(err) {
                solve_switch(&ctx, &mut gd, 2, |c, s| c.profile(s));
            }
            advance(&mut gd, t, t + cfg.period);
        }
        _ => {}
    }
    if gd.phase == GuidancePhase::Phase4 {
        let mode = ProfileMode::Constant(ControlCommand::new(gd.sigma4, veh.alpha_min));
        let err = refresh_exit_estimate(&ctx, &mut gd, &mode);
        gd.predicted_ra_error = err;
        if !ctx.within_deadband(err) {
            solve_sigma4(&ctx, &mut gd, veh.alpha_min);
        }
        return (ControlCommand::new(gd.sigma4, veh.alpha_min), gd);
    }
    (phase_command(gd.phase, veh), gd)
}

/// Moves through every phase whose switch falls before `t_next`, the time
/// of the next guidance call. A switch taken early is committed at `t`.
fn advance(gd: &mut GuidanceState, t: f64, t_next: f64) {
    let s = &mut gd.schedule;
    if gd.phase == GuidancePhase::Phase1 && t_next > s.t_s1 {
        gd.phase = GuidancePhase::Phase2;
        s.t_s1 = s.t_s1.min(t);
    }
    if gd.phase == GuidancePhase::Phase2 && t_next > s.t_s2 {
        gd.phase = GuidancePhase::Phase3;
        s.t_s2 = s.t_s2.min(t).max(s.t_s1);
    }
    if gd.phase == GuidancePhase::Phase3 && t_next > s.t_s3 {
        gd.phase = GuidancePhase::Phase4;
        s.t_s3 = s.t_s3.min(t).max(s.t_s2);
    }
}

/// FNPAG has a single switch; it is taken at the last call before it.
fn fnpag_advance(gd: &mut GuidanceState, t: f64, t_next: f64) {
    if gd.phase == GuidancePhase::Phase1 && t_next > gd.schedule.t_s1 {
        gd.phase = GuidancePhase::Phase2;
        gd.schedule = SwitchingSchedule::immediate(gd.schedule.t_s1.min(t));
    }
}

/// Bang-bang command flown during phases 1 to 3.
fn phase_command(phase: GuidancePhase, veh: &VehicleParams) -> ControlCommand {
    match phase {
        GuidancePhase::PrePhase1 | GuidancePhase::Phase1 => ControlCommand::new(veh.sigma_min, veh.alpha_min),
        GuidancePhase::Phase2 => ControlCommand::new(veh.sigma_min, veh.alpha_max),
        _ => ControlCommand::new(veh.sigma_max, veh.alpha_max),
    }
}

/// One FNPAG call: bank switch time solve, then constant-bank solve, at a
/// fixed angle of attack.
pub fn fnpag_step(
    state: &EntryState,
    sensed_accel: f64,
    gd: &GuidanceState,
    models: &GuidanceModels,
    cfg: &GuidanceConfig,
) -> (ControlCommand, GuidanceState) {
    guarded(state, sensed_accel, gd, models, cfg, fnpag_inner)
}

fn fnpag_inner(
    state: &EntryState,
    sensed_accel: f64,
    gd: &GuidanceState,
    models: &GuidanceModels,
    cfg: &GuidanceConfig,
) -> (ControlCommand, GuidanceState) {
    let mut gd = *gd;
    let veh = &models.veh;
    let alpha = cfg.fnpag_alpha.unwrap_or(veh.alpha_min);
    let t = state.t;
    if gd.phase == GuidancePhase::PrePhase1 {
        if sensed_accel / G0 <= cfg.trigger_g {
            return (ControlCommand::new(veh.sigma_min, alpha), gd);
        }
        gd.phase = GuidancePhase::Phase1;
        let ctx = Ctx { cfg, models, state, ratio: gd.filter.ratio_est };
        let dur = ctx.duration_estimate();
        gd.schedule = SwitchingSchedule::immediate(t + 0.5 * dur);
        gd.t_exit_estimate = t + dur;
    }
    if cfg.filter_enabled {
        let ctx = Ctx { cfg, models, state, ratio: 1.0 };
        gd.filter = update_filter(gd.filter, sensed_accel, ctx.sensed_model(&gd.last_cmd));
    }
    let ctx = Ctx { cfg, models, state, ratio: gd.filter.ratio_est };
    fnpag_advance(&mut gd, t, t + cfg.period);
    if gd.phase == GuidancePhase::Phase1 {
        let mode = ctx.fnpag_profile(gd.schedule.t_s1);
        let err = refresh_exit_estimate(&ctx, &mut gd, &mode);
        gd.predicted_ra_error = err;
        if !ctx.within_deadband(err) {
            solve_switch(&ctx, &mut gd, 0, |c, s| c.fnpag_profile(s.t_s1));
        }
        fnpag_advance(&mut gd, t, t + cfg.period);
        if gd.phase == GuidancePhase::Phase1 {
            return (ControlCommand::new(veh.sigma_min, alpha), gd);
        }
    }
    let mode = ProfileMode::Constant(ControlCommand::new(gd.sigma4, alpha));
    let err = refresh_exit_estimate(&ctx, &mut gd, &mode);
    gd.predicted_ra_error = err;
    if !ctx.within_deadband(err) {
        solve_sigma4(&ctx, &mut gd, alpha);
    }
    (ControlCommand::new(gd.sigma4, alpha), gd)
}

/// Guidance in the simulation loop: calls the configured algorithm at the
/// guidance rate and records telemetry.
pub struct GuidanceLaw {
    pub cfg: GuidanceConfig,
    pub models: GuidanceModels,
    pub state: GuidanceState,
    pub telemetry: Vec<TelemetryRow>,
}

impl GuidanceLaw {
    pub fn new(cfg: GuidanceConfig, models: GuidanceModels) -> Self {
        let state = GuidanceState::new(&cfg, &models);
        Self { cfg, models, state, telemetry: Vec::new() }
    }
}

impl ControlLaw for GuidanceLaw {
    fn command(&mut self, state: &EntryState, sensed_accel: f64) -> ControlCommand {
        let step = match self.cfg.algorithm {
            Algorithm::Abamguid => abamguid_step,
            Algorithm::Fnpag => fnpag_step,
        };
        let (cmd, gd) = step(state, sensed_accel, &self.state, &self.models, &self.cfg);
        self.state = gd;
        let s = gd.schedule;
        self.telemetry.push(TelemetryRow {
            t: state.t,
            phase: gd.phase,
            t_s1: s.t_s1,
            t_s2: s.t_s2,
            t_s3: s.t_s3,
            sigma4: gd.sigma4,
            sigma_cmd: cmd.sigma,
            alpha_cmd: cmd.alpha,
            predicted_ra_error: gd.predicted_ra_error,
            ratio_est: gd.filter.ratio_est,
            nm_iters: gd.last_solver.iterations,
            converged: gd.last_solver.converged,
        });
        cmd
    }

    fn next_update(&self, t: f64) -> f64 {
        t + self.cfg.period
    }
}
