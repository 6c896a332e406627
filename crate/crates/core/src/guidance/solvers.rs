//! Nelder-Mead, secant Newton-Raphson and bounded Brent solvers used in the
//! guidance loop.

use serde::{Deserialize, Serialize};

use crate::numerics::{brent_minimize, brent_root};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    /// Offset added along each basis vector to build the initial simplex, s.
    pub init_step: f64,
    /// Stop when the standard deviation of the simplex costs drops below this.
    pub eps_nm: f64,
    pub max_iter: usize,
    /// Cost assigned to schedules that violate the switch ordering.
    pub penalty: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { init_step: 10.0, eps_nm: 1e3, max_iter: 100, penalty: 1e30 }
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Minimizes `f` from `x0` with reflection 1, expansion 2, contraction 0.5
/// and shrink 0.5. Returns the best vertex.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], cfg: &NelderMeadConfig) -> (Vec<f64>, SolverDiagnostics) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += cfg.init_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if std_dev(&vals) < cfg.eps_nm {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |c: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + c * (pts[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, if fc <= fr { fc } else { f64::INFINITY })
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, if fc < vals[n] { fc } else { f64::INFINITY })
        };
        if fc.is_finite() {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
    }
    (pts[0].clone(), SolverDiagnostics { iterations, converged, final_cost: vals[0] })
}

/// Secant Newton-Raphson on `z(t) = 0`, iterates clamped to `window`.
///
/// Stops when `|z dz/dt| <= eps_nr` with the secant derivative. A flat secant
/// or a clamped iterate that stays on the boundary ends the solve with
/// `converged = false`; the best point seen is returned.
pub fn phase3_newton<Z: FnMut(f64) -> f64>(
    t_init: f64,
    mut z: Z,
    window: (f64, f64),
    eps_nr: f64,
    max_iter: usize,
) -> (f64, SolverDiagnostics) {
    let (lo, hi) = window;
    let clamp = |t: f64| t.clamp(lo, hi.max(lo));
    let mut t_prev = clamp(t_init);
    let mut t_cur = if t_prev + 1.0 <= hi { t_prev + 1.0 } else { clamp(t_prev - 1.0) };
    let mut z_prev = z(t_prev);
    let mut z_cur = z(t_cur);
    let mut best = if z_cur.abs() < z_prev.abs() { (t_cur, z_cur) } else { (t_prev, z_prev) };
    let diag = |it: usize, ok: bool, zb: f64| SolverDiagnostics { iterations: it, converged: ok, final_cost: 0.5 * zb * zb };
    for it in 1..=max_iter {
        let dz = z_cur - z_prev;
        if dz == 0.0 || t_cur == t_prev {
            return (best.0, diag(it - 1, z_cur == 0.0, best.1));
        }
        let slope = dz / (t_cur - t_prev);
        if (z_cur * slope).abs() <= eps_nr {
            return (t_cur, diag(it - 1, true, z_cur));
        }
        let raw = t_cur - z_cur / slope;
        let t_next = clamp(raw);
        if t_next != raw && t_next == t_cur {
            return (t_cur, diag(it, false, z_cur));
        }
        t_prev = t_cur;
        z_prev = z_cur;
        t_cur = t_next;
        z_cur = z(t_cur);
        if z_cur.abs() < best.1.abs() {
            best = (t_cur, z_cur);
        }
    }
    (best.0, diag(max_iter, false, best.1))
}

/// Constant bank angle minimizing the apoapsis error on `bounds`: Brent root
/// finding when the error changes sign, otherwise Brent minimization of the
/// squared error.
pub fn phase4_brent<E: FnMut(f64) -> f64>(
    sigma_init: f64,
    mut err: E,
    bounds: (f64, f64),
    xtol: f64,
    max_iter: usize,
) -> (f64, SolverDiagnostics) {
    let (lo, hi) = bounds;
    let (f_lo, f_hi) = (err(lo), err(hi));
    if f_lo == 0.0 || f_hi == 0.0 {
        let x = if f_lo == 0.0 { lo } else { hi };
        return (x, SolverDiagnostics { iterations: 0, converged: true, final_cost: 0.0 });
    }
    if f_lo * f_hi < 0.0 {
        let sol = brent_root(&mut err, lo, hi, xtol, max_iter).expect("bracketed");
        return (sol.x, SolverDiagnostics { iterations: sol.iterations, converged: sol.converged, final_cost: 0.5 * sol.fx * sol.fx });
    }
    let _ = sigma_init;
    let sol = brent_minimize(|s| err(s).powi(2), lo, hi, xtol, max_iter);
    // Monotone errors put the minimum on a bound; compare them explicitly.
    let mut best = (sol.x, sol.fx);
    for (x, f) in [(lo, f_lo * f_lo), (hi, f_hi * f_hi)] {
        if f < best.1 {
            best = (x, f);
        }
    }
    (best.0, SolverDiagnostics { iterations: sol.iterations, converged: false, final_cost: 0.5 * best.1 })
}
