//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=3,5` runs a subset. Campaign and sweep outputs land in
//! the cargo target tmpdir under `acceptance/`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use aerocapture::dynamics::{propagate, ControlCommand, EntryState, EventSpec, IntegratorConfig, LongitudinalState, Models};
use aerocapture::environment::{AtmosphereModel, PlanetModel};
use aerocapture::guidance::filter::{update_filter, DensityFilterState};
use aerocapture::guidance::solvers::{nelder_mead, phase3_newton, NelderMeadConfig};
use aerocapture::guidance::{targeting_cost, Algorithm, GuidanceConfig};
use aerocapture::harness::{corridor_sweep, run_monte_carlo, simulate_once, Campaign, DispersionSpec, RunConfig, RunOutcome};
use aerocapture::orbit::{apoapsis_radius, single_burn_dv, TargetOrbit};
use aerocapture::profiles::{
    costate_derivatives, fly_schedule, hamiltonian, oracle_optimize, switching_trace, zero_crossings, Anchor, CostateVector, OracleConfig,
    SwitchStructure, SwitchingSchedule,
};
use aerocapture::vehicle::VehicleParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

/// Criteria allowed to report FAIL without failing the test binary.
const KNOWN_UNATTAINABLE: &[usize] = &[];

fn out_dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn quiet(alg: Algorithm) -> RunConfig {
    let mut cfg = RunConfig::uranus_default().with_algorithm(alg);
    cfg.dispersions = DispersionSpec::none();
    cfg
}

fn desk_entry(cfg: &RunConfig, efpa: f64) -> LongitudinalState {
    let mut c = cfg.clone();
    c.entry.efpa_deg = efpa;
    c.oracle_entry()
}

// 1

fn kepler_drift() -> (f64, f64) {
    let planet = PlanetModel::uranus().non_rotating();
    let veh = VehicleParams::default_probe();
    let atm = AtmosphereModel::exponential(1e-300, 1.0, -1e12, 1e12);
    let models = Models { planet: &planet, atm: &atm, veh: &veh };
    let r0 = 1.5 * planet.r_eq;
    let v0 = 1.15 * (planet.mu / r0).sqrt();
    let s0 = EntryState { r: r0, theta: 0.0, phi: 0.0, v: v0, gamma: 0.05, psi: std::f64::consts::FRAC_PI_2, t: 0.0 };
    let a = 1.0 / (2.0 / r0 - v0 * v0 / planet.mu);
    let period = std::f64::consts::TAU * (a.powi(3) / planet.mu).sqrt();
    let cfg = IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-10, max_step: 600.0, ..IntegratorConfig::truth_default() };
    let traj = propagate(s0, &mut ControlCommand::new(0.0, -25.0), &cfg, &[EventSpec::time_limit(period)], &models).unwrap();
    let inv = |s: &EntryState| (0.5 * s.v * s.v - planet.mu / s.r, s.r * s.v * s.gamma.cos());
    let (e0, h0) = inv(&s0);
    traj.points.iter().fold((0.0f64, 0.0f64), |(de, dh), p| {
        let (e, h) = inv(&p.state);
        (de.max(((e - e0) / e0).abs()), dh.max(((h - h0) / h0).abs()))
    })
}

fn rk4_order_ratio(dt: f64) -> f64 {
    let planet = PlanetModel::uranus();
    let veh = VehicleParams::default_probe();
    let atm = AtmosphereModel::uranus_nominal();
    let models = Models { planet: &planet, atm: &atm, veh: &veh };
    let s0 = EntryState { r: planet.r_atm, theta: 0.3, phi: -0.2, v: 23_000.0, gamma: -0.19, psi: 2.0, t: 0.0 };
    let run = |h: f64| {
        let cfg = IntegratorConfig::rk4(h);
        let traj = propagate(s0, &mut ControlCommand::new(60.0, -20.0), &cfg, &[EventSpec::time_limit(200.0)], &models).unwrap();
        traj.final_state().v
    };
    let (a, b, c) = (run(dt), run(dt / 2.0), run(dt / 4.0));
    (a - b) / (b - c)
}

fn dynamics_fidelity() -> Check {
    let (de, dh) = kepler_drift();
    let ratio = rk4_order_ratio(4.0);
    let pass = de < 1e-9 && dh < 1e-9 && (8.0..=32.0).contains(&ratio);
    Check::new(pass, format!("energy drift {de:.2e}, momentum drift {dh:.2e}, RK4 ratio {ratio:.2}"))
}

// 2

fn hamiltonian_fd() -> Check {
    let cfg = RunConfig::desk().unwrap();
    let (planet, atm, veh) = (&cfg.planet, &cfg.atmosphere, &cfg.vehicle);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = LongitudinalState {
            r: planet.r_eq + rng.gen_range(150e3..1000e3),
            v: rng.gen_range(10e3..24e3),
            gamma: rng.gen_range(-20.0f64..15.0).to_radians(),
            t: 0.0,
        };
        let lam = CostateVector::new(rng.gen_range(-1e-5..1e-5), rng.gen_range(-1e-3..1e-3), rng.gen_range(-10.0..10.0));
        let u1 = rng.gen_range(veh.sigma_min..veh.sigma_max).to_radians().cos();
        let alpha = rng.gen_range(veh.alpha_min..veh.alpha_max);
        let exact = costate_derivatives(&x, &lam, u1, alpha, planet, atm, veh).unwrap().to_array();
        let steps = [1e-6 * x.r, 1e-6 * x.v, 1e-6];
        for i in 0..3 {
            let h = steps[i];
            let at = |d: f64| {
                let mut y = x.to_array();
                y[i] += d;
                hamiltonian(&LongitudinalState::from_array(&y, 0.0), &lam, u1, alpha, planet, atm, veh).unwrap()
            };
            // Fourth-order central difference.
            let dh = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            let fd = -dh;
            let rel = (exact[i] - fd).abs() / exact[i].abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    Check::new(worst < 1e-5, format!("worst relative error {worst:.2e} over 1000 states"))
}

// 3

fn switching_structure() -> Check {
    let cfg = RunConfig::desk().unwrap();
    let ocfg = OracleConfig::default();
    let cases = [
        ("nominal", -10.82, SwitchStructure::Full),
        ("shallow", -10.67, SwitchStructure::LiftDownAlpha),
        ("steep", -11.0, SwitchStructure::SigmaOnly),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, efpa, want) in cases {
        let entry = desk_entry(&cfg, efpa);
        let sol = oracle_optimize(&entry, &cfg.planet, &cfg.atmosphere, &cfg.vehicle, &cfg.target, &ocfg).unwrap();
        let got = sol.schedule.structure(entry.t, 1e-6);
        let anchors = sol.schedule.anchors(entry.t, 1e-6);
        let traj = fly_schedule(&entry, &sol.schedule, &cfg.planet, &cfg.atmosphere, &cfg.vehicle, &ocfg.propagation).unwrap();
        let trace = switching_trace(&traj, &cfg.target, &anchors, &cfg.planet, &cfg.atmosphere, &cfg.vehicle).unwrap();
        let mut miss = 0.0f64;
        for a in &anchors {
            let (t, c) = match *a {
                Anchor::Sigma(t) => (t, zero_crossings(&trace, |p| p.h_sigma)),
                Anchor::AlphaDown(t) => (t, zero_crossings(&trace, |p| p.h_alpha_down)),
                Anchor::AlphaUp(t) => (t, zero_crossings(&trace, |p| p.h_alpha_up)),
            };
            miss = miss.max(c.iter().map(|x| (x - t).abs()).fold(f64::INFINITY, f64::min));
        }
        let ok = got == want && !anchors.is_empty() && miss <= 1.0;
        pass &= ok;
        let s = sol.schedule;
        parts.push(format!("{name} {efpa}: {got:?} ({:.1}, {:.1}, {:.1}) s, worst crossing offset {miss:.3} s", s.t_s1, s.t_s2, s.t_s3));
    }
    Check::new(pass, parts.join("; "))
}

// 4

fn closed_loop_targeting() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for alg in [Algorithm::Abamguid, Algorithm::Fnpag] {
        let r = simulate_once(&quiet(alg), 0, 1).unwrap();
        let err = r.ra_error.unwrap_or(f64::INFINITY);
        pass &= r.outcome == RunOutcome::Success && err.abs() <= 0.005;
        parts.push(format!("{} {} r_a error {:+.3e}", alg.as_str(), r.outcome.as_str(), err));
    }
    Check::new(pass, parts.join(", "))
}

// 5

/// EFPA at which a constant command exits exactly on the target apoapsis.
fn corridor_edge(cfg: &RunConfig, sigma: f64) -> f64 {
    let ocfg = OracleConfig::default();
    let sched = if sigma == cfg.vehicle.sigma_min {
        SwitchingSchedule::new(f64::INFINITY, f64::INFINITY, f64::INFINITY)
    } else {
        SwitchingSchedule::immediate(0.0)
    };
    let ra = |efpa: f64| {
        let traj = fly_schedule(&desk_entry(cfg, efpa), &sched, &cfg.planet, &cfg.atmosphere, &cfg.vehicle, &ocfg.propagation).unwrap();
        traj.apoapsis(&cfg.planet)
    };
    // Steeper entries give smaller apoapses.
    let (mut steep, mut shallow) = (-13.0, -9.0);
    for _ in 0..40 {
        let mid = 0.5 * (steep + shallow);
        if ra(mid) > cfg.target.r_a_target {
            shallow = mid;
        } else {
            steep = mid;
        }
    }
    0.5 * (steep + shallow)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn optimality_gap() -> Check {
    let cfg = RunConfig::desk().unwrap().with_algorithm(Algorithm::Abamguid);
    let steep = corridor_edge(&cfg, cfg.vehicle.sigma_min);
    let shallow = corridor_edge(&cfg, cfg.vehicle.sigma_max);
    let margin = 0.02 * (shallow - steep);
    let n = 20;
    let ocfg = OracleConfig::default();
    let mut gaps = Vec::new();
    let mut unmatched = Vec::new();
    for i in 0..n {
        let efpa = steep + margin + (shallow - steep - 2.0 * margin) * i as f64 / (n - 1) as f64;
        let oracle = oracle_optimize(&desk_entry(&cfg, efpa), &cfg.planet, &cfg.atmosphere, &cfg.vehicle, &cfg.target, &ocfg);
        let mut c = cfg.clone();
        c.entry.efpa_deg = efpa;
        let run = simulate_once(&c, i, 1).unwrap();
        // Unmatched states count as an infinite gap.
        let gap = match (&oracle, run.delta_v) {
            (Ok(o), Some(dv)) => dv / o.delta_v - 1.0,
            (Err(e), _) => {
                unmatched.push(format!("{efpa:.3} oracle: {e}"));
                f64::INFINITY
            }
            (_, None) => {
                unmatched.push(format!("{efpa:.3} closed loop: {}", run.outcome.as_str()));
                f64::INFINITY
            }
        };
        gaps.push(gap);
    }
    let med = median(gaps.clone());
    let worst = gaps.iter().copied().filter(|g| g.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    Check::new(
        med <= 0.10,
        format!(
            "corridor [{steep:.3}, {shallow:.3}] deg, median gap {:.2}%, worst matched {:.2}%, unmatched [{}]",
            100.0 * med,
            100.0 * worst,
            unmatched.join("; ")
        ),
    )
}

// 6

fn campaign(dispersions: DispersionSpec, alg: Algorithm, set: &str) -> Campaign {
    let mut cfg = RunConfig::uranus_default().with_algorithm(alg);
    cfg.dispersions = dispersions;
    let c = run_monte_carlo(&cfg, 500, 1, workers()).unwrap();
    c.write(&out_dir(&format!("{set}_{}", alg.as_str()))).unwrap();
    c
}

fn monte_carlo_direction() -> Check {
    let mut parts = Vec::new();
    let mut conservative = Vec::new();
    for (set, disp) in [("conservative", DispersionSpec::conservative()), ("baseline", DispersionSpec::baseline())] {
        for alg in [Algorithm::Abamguid, Algorithm::Fnpag] {
            let r = campaign(disp.clone(), alg, set).report;
            parts.push(format!(
                "{set} {}: pass {:.1}%, lander {}, hyperbolic {}, p99 {}",
                alg.as_str(),
                r.pass_percent,
                r.lander_count,
                r.hyperbolic_count,
                r.dv_p99.map_or("-".into(), |v| format!("{v:.3} m/s"))
            ));
            if set == "conservative" {
                conservative.push(r);
            }
        }
    }
    let (a, f) = (&conservative[0], &conservative[1]);
    let pass_ok = a.pass_percent >= f.pass_percent;
    let p99_ok = matches!((a.dv_p99, f.dv_p99), (Some(x), Some(y)) if x <= y);
    let hyper_ok = conservative.iter().all(|r| r.hyperbolic_count > r.lander_count);
    parts.push(format!("(a) {} (b) {} (c) {}", ok(pass_ok), ok(p99_ok), ok(hyper_ok)));
    Check::new(pass_ok && p99_ok && hyper_ok, parts.join("; "))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

// 7

fn corridor_widening() -> Check {
    let mut widths = Vec::new();
    for alg in [Algorithm::Abamguid, Algorithm::Fnpag] {
        let cfg = RunConfig::uranus_default().with_algorithm(alg);
        let t = corridor_sweep(&cfg, (-11.2, -10.6), 13, 40, 1, workers()).unwrap();
        t.write_csv(&out_dir("corridor").join(format!("{}.csv", alg.as_str()))).unwrap();
        widths.push((alg, t.band));
    }
    let w = |i: usize| widths[i].1.map_or(0.0, |b| b.width);
    let fmt = |i: usize| match widths[i].1 {
        Some(b) => format!("{} [{:.3}, {:.3}] width {:.3} deg", widths[i].0.as_str(), b.lo, b.hi, b.width),
        None => format!("{} no band", widths[i].0.as_str()),
    };
    Check::new(widths[0].1.is_some() && w(0) >= w(1), format!("{}; {}", fmt(0), fmt(1)))
}

// 8

fn determinism() -> Check {
    let mut cfg = RunConfig::uranus_default();
    cfg.dispersions = DispersionSpec::conservative();
    let mut files = Vec::new();
    for w in [1, 8] {
        let dir = out_dir(&format!("workers_{w}"));
        run_monte_carlo(&cfg, 24, 1, w).unwrap().write(&dir).unwrap();
        files.push((std::fs::read(dir.join("report.json")).unwrap(), std::fs::read(dir.join("results.csv")).unwrap()));
    }
    let same_report = files[0].0 == files[1].0;
    let same_results = files[0].1 == files[1].1;
    Check::new(same_report, format!("24 runs, report.json identical: {same_report}, results.csv identical: {same_results}"))
}

// 9

fn unit_identities() -> Check {
    let mu = 5.794e15;
    let r = 2.6e7;
    let mut fails = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            fails.push(name.to_string());
        }
    };

    let circ = apoapsis_radius(r, (mu / r).sqrt(), 0.0, mu).unwrap();
    check("circular apoapsis", ((circ - r) / r).abs() < 1e-12);
    let v = 0.9 * (2.0 * mu / r).sqrt();
    let a = mu / (2.0 * mu / r - v * v);
    let radial = apoapsis_radius(r, v, std::f64::consts::FRAC_PI_2, mu).unwrap();
    check("radial apoapsis", ((radial - 2.0 * a) / (2.0 * a)).abs() < 1e-12);

    let target = TargetOrbit { r_a_target: 2.5e9, r_p_target: 3.0e7 };
    let matched = single_burn_dv(target.r_a_target, 0.5 * (target.r_a_target + target.r_p_target), &target, mu).unwrap();
    check("matching orbit needs no burn", matched < 1e-9);
    for (ra, a) in [(2.0e9, 1.0e9), (2.5e9, 1.3e9), (3.1e9, 1.6e9)] {
        let before = (mu * (2.0 / ra - 1.0 / a)).sqrt();
        let after = (mu * (2.0 / ra - 2.0 / (ra + target.r_p_target))).sqrt();
        let dv = single_burn_dv(ra, a, &target, mu).unwrap();
        check("vis-viva agreement", ((dv - (after - before).abs()) / dv).abs() < 1e-9);
    }

    let cfg = quiet(Algorithm::Abamguid);
    let gm = cfg.guidance_models().unwrap();
    let gcfg = GuidanceConfig::default();
    let s0 = cfg.entry.to_state(&cfg.planet);
    let swapped = SwitchingSchedule::new(250.0, 200.0, 300.0);
    check("disordered schedule costs the penalty", targeting_cost(&s0, swapped, 1.0, &gm, &gcfg) == gcfg.nelder_mead.penalty);
    let ordered = targeting_cost(&s0, SwitchingSchedule::new(200.0, 250.0, 300.0), 1.0, &gm, &gcfg);
    check("ordered schedule costs less than the penalty", ordered < gcfg.nelder_mead.penalty);

    let c = [3.0, -7.0, 12.0];
    let nm = NelderMeadConfig { init_step: 1.0, eps_nm: 1e-16, max_iter: 2_000, penalty: 1e30 };
    let (x, d) = nelder_mead(|x| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum(), &[2.5, -6.0, 11.0], &nm);
    check("Nelder-Mead quadratic", d.converged && x.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-3));

    let (t, d) = phase3_newton(1.0, |t| (t - 3.0).powi(3) + (t - 3.0), (0.0, 10.0), 1e-20, 100);
    check("secant cubic root", d.converged && (t - 3.0).abs() < 1e-8);

    let mut fs = DensityFilterState::default();
    for _ in 0..300 {
        fs = update_filter(fs, 1.3 * 2.0, 2.0);
    }
    check("filter fixed point", (fs.ratio_est - 1.3).abs() < 1e-12);
    let still = update_filter(DensityFilterState { ratio_est: 1.0, gain: 0.1 }, 2.0, 2.0);
    check("filter holds at ratio one", still.ratio_est == 1.0);

    let detail = if fails.is_empty() { "all identities hold".to_string() } else { format!("failed: {}", fails.join(", ")) };
    Check::new(fails.is_empty(), detail)
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Duration, fn() -> Check); 9] = [
        (1, "dynamics fidelity", Duration::from_secs(10), dynamics_fidelity),
        (2, "Hamiltonian derivatives", Duration::from_secs(30), hamiltonian_fd),
        (3, "switching structure", Duration::from_secs(300), switching_structure),
        (4, "closed-loop targeting", Duration::from_secs(60), closed_loop_targeting),
        (5, "optimality gap", Duration::from_secs(600), optimality_gap),
        (6, "Monte Carlo direction", Duration::from_secs(1800), monte_carlo_direction),
        (7, "corridor widening", Duration::from_secs(1200), corridor_widening),
        (8, "worker determinism", Duration::from_secs(300), determinism),
        (9, "unit identities", Duration::from_secs(60), unit_identities),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let c = run();
        let took = started.elapsed();
        let in_time = took <= budget;
        let pass = c.pass && in_time;
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {name}: {verdict} ({}; {:.1} s of {} s)", c.detail, took.as_secs_f64(), budget.as_secs());
        if !pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failed criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
