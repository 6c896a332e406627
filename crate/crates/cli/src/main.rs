use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerocapture::error::{Error, Result};
use aerocapture::guidance::{write_telemetry_csv, Algorithm};
use aerocapture::harness::io::write_json;
use aerocapture::harness::{corridor_sweep, fly, run_monte_carlo, RunConfig};
use aerocapture::profiles::{fly_schedule, oracle_optimize, switching_trace, write_switching_csv, OracleConfig};
use aerocapture::vehicle::{fit_linear, AeroModel};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aerocapture", version, about = "Aerocapture guidance simulation and Monte Carlo analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Run configuration (JSON).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Output directory; defaults to the config's `output_dir` or `.`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.runs {
            cfg.n_runs = n;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(a) = self.algorithm {
            cfg.guidance.algorithm = a;
        }
        cfg.validate()?;
        let out = self.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)?;
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fly one closed-loop pass; writes trajectory.csv, telemetry.csv and result.json.
    Simulate(Overrides),
    /// Run a dispersed campaign; writes results.csv and report.json.
    Montecarlo(Overrides),
    /// Reference optimal schedule for the configured entry; writes oracle.json and switching.csv.
    Oracle {
        #[command(flatten)]
        o: Overrides,
        /// Entry flight-path angle override, deg.
        #[arg(long, allow_hyphen_values = true)]
        efpa: Option<f64>,
    },
    /// Success rate against nominal EFPA; writes corridor.csv and corridor.json.
    Sweep {
        #[command(flatten)]
        o: Overrides,
        #[arg(long, allow_hyphen_values = true, default_value_t = -11.3)]
        from: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -10.5)]
        to: f64,
        #[arg(long, default_value_t = 17)]
        points: usize,
        /// Runs per EFPA point; defaults to the config's run count.
        #[arg(long)]
        per_point: Option<usize>,
    },
    /// Aerodynamic model utilities.
    Aero {
        #[command(subcommand)]
        cmd: AeroCmd,
    },
    /// Print the default run configuration as JSON.
    DefaultConfig {
        /// Print the simplified desk configuration instead.
        #[arg(long)]
        desk: bool,
    },
}

#[derive(Subcommand)]
enum AeroCmd {
    /// Least-squares linear fit of a tabulated model.
    Fit {
        /// CSV of `alpha_deg, CL, CD`; the built-in table when absent.
        table: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true, default_value_t = -25.0)]
        alpha_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
        alpha_max: f64,
    },
}

fn simulate(o: &Overrides) -> Result<()> {
    let (cfg, out) = o.load()?;
    let mut flight = fly(&cfg, 0, cfg.seed)?;
    if let Some(traj) = &flight.trajectory {
        traj.write_csv(&out.join("trajectory.csv"))?;
    }
    let tele = out.join("telemetry.csv");
    write_telemetry_csv(&tele, &flight.telemetry)?;
    flight.result.telemetry = Some(tele);
    write_json(&out.join("result.json"), &flight.result)?;
    let r = &flight.result;
    println!(
        "{}: outcome {} delta_v {} peak_g {:.3} ra_error {}",
        cfg.guidance.algorithm.as_str(),
        r.outcome.as_str(),
        r.delta_v.map_or("-".into(), |v| format!("{v:.3} m/s")),
        r.peak_g,
        r.ra_error.map_or("-".into(), |e| format!("{e:.3e}")),
    );
    Ok(())
}

fn montecarlo(o: &Overrides) -> Result<()> {
    let (cfg, out) = o.load()?;
    let campaign = run_monte_carlo(&cfg, cfg.n_runs, cfg.seed, cfg.workers)?;
    campaign.write(&out)?;
    println!("{}", serde_json::to_string_pretty(&campaign.report)?);
    Ok(())
}

fn oracle(o: &Overrides, efpa: Option<f64>) -> Result<()> {
    let (mut cfg, out) = o.load()?;
    if let Some(e) = efpa {
        cfg.entry.efpa_deg = e;
    }
    let veh = cfg.vehicle.with_aero(cfg.onboard_aero()?);
    let entry = cfg.oracle_entry();
    let ocfg = OracleConfig::default();
    let sol = oracle_optimize(&entry, &cfg.planet, &cfg.atmosphere, &veh, &cfg.target, &ocfg)?;
    let structure = sol.schedule.structure(entry.t, 1e-6);
    let traj = fly_schedule(&entry, &sol.schedule, &cfg.planet, &cfg.atmosphere, &veh, &ocfg.propagation)?;
    let anchors = sol.schedule.anchors(entry.t, 1e-6);
    if !anchors.is_empty() {
        let trace = switching_trace(&traj, &cfg.target, &anchors, &cfg.planet, &cfg.atmosphere, &veh)?;
        write_switching_csv(&out.join("switching.csv"), &trace)?;
    }
    let report = serde_json::json!({ "efpa_deg": cfg.entry.efpa_deg, "structure": structure, "solution": &sol });
    write_json(&out.join("oracle.json"), &report)?;
    let s = sol.schedule;
    println!(
        "efpa {:.3}: t_s = ({:.2}, {:.2}, {:.2}) s, {:?}, delta_v {:.4} m/s",
        cfg.entry.efpa_deg, s.t_s1, s.t_s2, s.t_s3, structure, sol.delta_v
    );
    Ok(())
}

fn sweep(o: &Overrides, from: f64, to: f64, points: usize, per_point: Option<usize>) -> Result<()> {
    let (cfg, out) = o.load()?;
    let table = corridor_sweep(&cfg, (from, to), points, per_point.unwrap_or(cfg.n_runs), cfg.seed, cfg.workers)?;
    table.write_csv(&out.join("corridor.csv"))?;
    write_json(&out.join("corridor.json"), &table)?;
    for p in &table.points {
        println!("{:8.3} {:6.1}%", p.efpa_deg, 100.0 * p.success_rate);
    }
    match table.band {
        Some(b) => println!("band [{:.3}, {:.3}] width {:.3} deg", b.lo, b.hi, b.width),
        None => println!("no EFPA reached {:.0}% success", 100.0 * table.threshold),
    }
    Ok(())
}

fn aero_fit(table: Option<&Path>, range: (f64, f64)) -> Result<()> {
    let model = match table {
        Some(p) => AeroModel::load_csv(p)?,
        None => AeroModel::default_tabulated(),
    };
    let fit = fit_linear(&model, range)?;
    if let AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 } = fit.model {
        println!("cd_alpha {cd_alpha:.6} /rad\ncd_0     {cd_0:.6}\ncl_alpha {cl_alpha:.6} /rad\ncl_0     {cl_0:.6}");
    }
    println!("max L/D error {:.3}%", 100.0 * fit.max_ld_error);
    if let Some(w) = fit.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(o) => simulate(&o),
        Command::Montecarlo(o) => montecarlo(&o),
        Command::Oracle { o, efpa } => oracle(&o, efpa),
        Command::Sweep { o, from, to, points, per_point } => sweep(&o, from, to, points, per_point),
        Command::Aero { cmd: AeroCmd::Fit { table, alpha_min, alpha_max } } => aero_fit(table.as_deref(), (alpha_min, alpha_max)),
        Command::DefaultConfig { desk } => {
            let cfg = if desk { RunConfig::desk()? } else { RunConfig::uranus_default() };
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::Json(_) | Error::Csv(_) => ExitCode::from(2),
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
