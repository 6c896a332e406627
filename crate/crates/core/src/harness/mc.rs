//! Monte Carlo campaigns, statistics and entry-corridor sweeps.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::Algorithm;

use super::config::RunConfig;
use super::io::{fmt_f64, write_csv, write_json};
use super::sim::{simulate_once, RunOutcome, RunResult};

/// Campaign summary. ΔV statistics cover successful runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n_runs: usize,
    pub pass_count: usize,
    pub pass_percent: f64,
    pub lander_count: usize,
    pub hyperbolic_count: usize,
    pub diagnostic_count: usize,
    /// m/s; absent without successes.
    pub dv_mean: Option<f64>,
    /// Three sample standard deviations, m/s.
    pub dv_3sigma: Option<f64>,
    /// 99th percentile by linear interpolation, m/s.
    pub dv_p99: Option<f64>,
    /// Set when exactly one run succeeded and the 3-sigma value is a
    /// placeholder zero.
    pub single_sample: bool,
}

/// Linear-interpolation percentile of sorted data, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    match sorted.len() {
        0 => None,
        1 => Some(sorted[0]),
        n => {
            let pos = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            Some(sorted[i] + frac * (sorted[i + 1] - sorted[i]))
        }
    }
}

/// Report over `results` in any order.
pub fn compute_stats(results: &[RunResult]) -> MonteCarloReport {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.run_id);
    let count = |o: RunOutcome| sorted.iter().filter(|r| r.outcome == o).count();
    let mut dv: Vec<f64> = sorted.iter().filter(|r| r.outcome == RunOutcome::Success).filter_map(|r| r.delta_v).collect();
    let n = dv.len();
    // Sums of deviations from the first sample: exact for constant data.
    let shift = dv.first().copied().unwrap_or(0.0);
    let (s1, s2) = dv.iter().fold((0.0, 0.0), |(a, b), x| (a + (x - shift), b + (x - shift) * (x - shift)));
    let mean = (n > 0).then(|| shift + s1 / n as f64);
    let three_sigma = mean.map(|_| if n < 2 { 0.0 } else { 3.0 * ((s2 - s1 * s1 / n as f64).max(0.0) / (n - 1) as f64).sqrt() });
    dv.sort_by(f64::total_cmp);
    let pass_count = count(RunOutcome::Success);
    MonteCarloReport {
        n_runs: results.len(),
        pass_count,
        pass_percent: if results.is_empty() { 0.0 } else { 100.0 * pass_count as f64 / results.len() as f64 },
        lander_count: count(RunOutcome::Lander),
        hyperbolic_count: count(RunOutcome::Hyperbolic),
        diagnostic_count: count(RunOutcome::Diagnostic),
        dv_mean: mean,
        dv_3sigma: three_sigma,
        dv_p99: percentile(&dv, 99.0),
        single_sample: n == 1,
    }
}

/// Runs `n_runs` passes with seeds `base_seed + i` on `workers` threads.
/// Results come back ordered by run id whatever the worker count.
pub fn run_batch(cfg: &RunConfig, n_runs: usize, base_seed: u64, workers: usize) -> Result<Vec<RunResult>> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut results = pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|i| simulate_once(cfg, i, base_seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()
    })?;
    results.sort_by_key(|r| r.run_id);
    Ok(results)
}

/// A campaign: per-run results plus the summary.
pub struct Campaign {
    pub results: Vec<RunResult>,
    pub report: MonteCarloReport,
}

pub fn run_monte_carlo(cfg: &RunConfig, n_runs: usize, base_seed: u64, workers: usize) -> Result<Campaign> {
    let results = run_batch(cfg, n_runs, base_seed, workers)?;
    let report = compute_stats(&results);
    Ok(Campaign { results, report })
}

impl Campaign {
    /// Writes `results.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_results_csv(&dir.join("results.csv"), &self.results)?;
        write_json(&dir.join("report.json"), &self.report)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_results_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let header = [
        "run_id", "seed", "efpa_actual", "outcome", "delta_v", "r_a", "e", "period", "peak_g", "ra_error", "diagnostic",
    ];
    let rows = results.iter().map(|r| {
        let o = r.exit_orbit.as_ref();
        vec![
            r.run_id.to_string(),
            r.seed.to_string(),
            fmt_f64(r.efpa_actual),
            r.outcome.as_str().to_string(),
            opt(r.delta_v),
            opt(o.map(|o| o.r_a)),
            opt(o.map(|o| o.e)),
            opt(o.map(|o| o.period)),
            fmt_f64(r.peak_g),
            opt(r.ra_error),
            r.diagnostic.clone().unwrap_or_default(),
        ]
    });
    write_csv(path, &header, rows)
}

/// Success rate at one nominal EFPA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorPoint {
    pub efpa_deg: f64,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
}

/// Widest contiguous run of sweep points meeting the success threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorBand {
    /// Grid points at the ends of the band, deg.
    pub first: f64,
    pub last: f64,
    /// Band edges placed where the success rate crosses the threshold,
    /// interpolated linearly against the neighbouring points outside the
    /// band, deg. Equal to the grid ends when the band touches the sweep
    /// limits.
    pub lo: f64,
    pub hi: f64,
    /// `hi - lo`, deg.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorTable {
    pub algorithm: Algorithm,
    pub threshold: f64,
    pub points: Vec<CorridorPoint>,
    pub band: Option<CorridorBand>,
}

/// Widest band of consecutive points with `success_rate >= threshold`.
pub fn widest_band(points: &[CorridorPoint], threshold: f64) -> Option<CorridorBand> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, p) in points.iter().enumerate() {
        if p.success_rate >= threshold {
            let s = *start.get_or_insert(i);
            let span = |a: usize, b: usize| (points[b].efpa_deg - points[a].efpa_deg).abs();
            let wider = best.is_none_or(|(a, b)| span(s, i) > span(a, b));
            if wider {
                best = Some((s, i));
            }
        } else {
            start = None;
        }
    }
    let (a, b) = best?;
    let edge = |inside: &CorridorPoint, outside: Option<&CorridorPoint>| match outside {
        Some(o) => {
            let f = (inside.success_rate - threshold) / (inside.success_rate - o.success_rate);
            inside.efpa_deg + f * (o.efpa_deg - inside.efpa_deg)
        }
        None => inside.efpa_deg,
    };
    let x0 = edge(&points[a], a.checked_sub(1).map(|j| &points[j]));
    let x1 = edge(&points[b], points.get(b + 1));
    let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
    Some(CorridorBand { first: points[a].efpa_deg, last: points[b].efpa_deg, lo, hi, width: hi - lo })
}

/// Sweeps the nominal EFPA over `efpa_range` with `n_points` points and
/// `runs_per_point` dispersed runs each. The EFPA dispersion is switched
/// off; every other dispersion stays active. Point `j` run `i` uses seed
/// `base_seed + i`, so all points and algorithms share draws.
pub fn corridor_sweep(
    cfg: &RunConfig,
    efpa_range: (f64, f64),
    n_points: usize,
    runs_per_point: usize,
    base_seed: u64,
    workers: usize,
) -> Result<CorridorTable> {
    if n_points < 2 {
        return Err(Error::InvalidConfig("a sweep needs at least two points".into()));
    }
    let mut swept = cfg.clone();
    swept.dispersions.efpa_sigma = 0.0;
    let mut points = Vec::with_capacity(n_points);
    for j in 0..n_points {
        let efpa = efpa_range.0 + (efpa_range.1 - efpa_range.0) * j as f64 / (n_points - 1) as f64;
        swept.entry.efpa_deg = efpa;
        let results = run_batch(&swept, runs_per_point, base_seed, workers)?;
        let successes = results.iter().filter(|r| r.outcome == RunOutcome::Success).count();
        points.push(CorridorPoint {
            efpa_deg: efpa,
            runs: runs_per_point,
            successes,
            success_rate: successes as f64 / runs_per_point as f64,
        });
    }
    let threshold = 0.95;
    Ok(CorridorTable { algorithm: cfg.guidance.algorithm, threshold, band: widest_band(&points, threshold), points })
}

impl CorridorTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.points.iter().map(|p| {
            vec![
                self.algorithm.as_str().to_string(),
                fmt_f64(p.efpa_deg),
                p.runs.to_string(),
                p.successes.to_string(),
                fmt_f64(p.success_rate),
            ]
        });
        write_csv(path, &["algorithm", "efpa_deg", "runs", "successes", "success_rate"], rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn run(id: usize, outcome: RunOutcome, dv: Option<f64>) -> RunResult {
        RunResult {
            run_id: id,
            seed: id as u64,
            efpa_actual: -10.8,
            outcome,
            delta_v: dv,
            exit_orbit: None,
            peak_g: 1.0,
            ra_error: None,
            wall_time: 0.0,
            diagnostic: None,
            telemetry: None,
        }
    }

    #[test]
    fn mean_of_three() {
        let rs: Vec<_> = [10.0, 20.0, 30.0].iter().enumerate().map(|(i, v)| run(i, RunOutcome::Success, Some(*v))).collect();
        let r = compute_stats(&rs);
        assert_eq!(r.dv_mean, Some(20.0));
        assert!((r.dv_3sigma.unwrap() - 30.0).abs() < 1e-12);
        assert!((r.dv_p99.unwrap() - 29.8).abs() < 1e-12);
        assert!(!r.single_sample);
    }

    #[test]
    fn single_success_is_flagged() {
        let rs = vec![run(0, RunOutcome::Success, Some(12.0)), run(1, RunOutcome::Hyperbolic, None)];
        let r = compute_stats(&rs);
        assert!(r.single_sample);
        assert_eq!(r.dv_3sigma, Some(0.0));
        assert_eq!(r.dv_p99, Some(12.0));
        assert_eq!(r.pass_percent, 50.0);
    }

    #[test]
    fn no_successes_leaves_stats_absent() {
        let rs = vec![run(0, RunOutcome::Lander, None), run(1, RunOutcome::Diagnostic, None)];
        let r = compute_stats(&rs);
        assert_eq!((r.dv_mean, r.dv_3sigma, r.dv_p99), (None, None, None));
        assert_eq!((r.lander_count, r.diagnostic_count, r.pass_count), (1, 1, 0));
    }

    #[test]
    fn synthetic_normal_p99() {
        let dist = Normal::new(20.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rs: Vec<_> = (0..1000).map(|i| run(i, RunOutcome::Success, Some(dist.sample(&mut rng)))).collect();
        let p99 = compute_stats(&rs).dv_p99.unwrap();
        let exact = 20.0 + 3.0 * 2.326_347_874;
        assert!((p99 - exact).abs() / exact < 0.05, "{p99} vs {exact}");
    }

    #[test]
    fn stats_ignore_input_order() {
        let mut rs: Vec<_> = (0..50)
            .map(|i| match i % 3 {
                0 => run(i, RunOutcome::Success, Some(10.0 + (i as f64 * 0.37).sin())),
                1 => run(i, RunOutcome::Hyperbolic, None),
                _ => run(i, RunOutcome::Lander, None),
            })
            .collect();
        let a = compute_stats(&rs);
        rs.reverse();
        rs.swap(3, 40);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&compute_stats(&rs)).unwrap());
    }

    #[test]
    fn percentile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&xs, 0.0), Some(1.0));
        assert_eq!(percentile(&xs, 100.0), Some(5.0));
        assert_eq!(percentile(&xs, 50.0), Some(3.0));
        assert!((percentile(&xs, 99.0).unwrap() - 4.96).abs() < 1e-12);
        assert_eq!(percentile(&[], 50.0), None);
    }

    fn pts(rates: &[f64]) -> Vec<CorridorPoint> {
        rates
            .iter()
            .enumerate()
            .map(|(i, r)| CorridorPoint { efpa_deg: -11.0 + 0.1 * i as f64, runs: 20, successes: (r * 20.0) as usize, success_rate: *r })
            .collect()
    }

    #[test]
    fn widest_band_interpolates_edges() {
        let b = widest_band(&pts(&[0.0, 1.0, 1.0, 0.9, 1.0, 1.0, 1.0, 0.5]), 0.95).unwrap();
        assert!((b.first + 10.6).abs() < 1e-9 && (b.last + 10.4).abs() < 1e-9);
        // 0.9 -> 1.0 crosses 0.95 half way; 1.0 -> 0.5 crosses at a tenth.
        assert!((b.lo + 10.65).abs() < 1e-9, "{b:?}");
        assert!((b.hi + 10.39).abs() < 1e-9, "{b:?}");
        assert!((b.width - 0.26).abs() < 1e-9);
    }

    #[test]
    fn band_touching_sweep_limits_and_empty_band() {
        let b = widest_band(&pts(&[1.0, 1.0]), 0.95).unwrap();
        assert!((b.lo + 11.0).abs() < 1e-12 && (b.hi + 10.9).abs() < 1e-12);
        assert!(widest_band(&pts(&[0.2, 0.9]), 0.95).is_none());
    }
}
