//! Small numerical kernels shared across modules: least squares, monotone
//! cubic interpolation and bracketing scalar solvers.

use crate::error::{Error, Result};

/// Solves the overdetermined system `a x ≈ b` in the least-squares sense using
/// Householder QR. `a` is row-major with `cols` columns.
pub fn least_squares(a: &[f64], b: &[f64], cols: usize) -> Result<Vec<f64>> {
    let rows = b.len();
    if rows < cols || a.len() != rows * cols {
        return Err(Error::DegenerateFit(format!(
            "need at least {cols} rows, got {rows}"
        )));
    }
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..cols {
        let norm: f64 = (k..rows).map(|i| m[i * cols + k].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::DegenerateFit("rank-deficient design matrix".into()));
        }
        let alpha = if m[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| m[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i - k] * m[i * cols + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                m[i * cols + j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i - k] * rhs[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            rhs[i] -= f * v[i - k];
        }
    }
    let scale = (0..cols).map(|k| m[k * cols + k].abs()).fold(0.0, f64::max);
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let diag = m[k * cols + k];
        if diag.abs() <= 1e-13 * scale {
            return Err(Error::DegenerateFit("rank-deficient design matrix".into()));
        }
        let s: f64 = ((k + 1)..cols).map(|j| m[k * cols + j] * x[j]).sum();
        x[k] = (rhs[k] - s) / diag;
    }
    Ok(x)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::DegenerateFit("pchip needs >= 2 matching points".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateFit("pchip abscissae must increase".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Evaluates the interpolant; callers are responsible for range checks.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Result of a bracketing scalar solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSolution {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Brent's root finder on `[a, b]`. Requires `f(a)` and `f(b)` of opposite sign
/// (or one of them zero); returns `None` otherwise.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<ScalarSolution> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    brent_root_bracketed(&mut f, &mut a, &mut b, &mut fa, &mut fb, xtol, max_iter)
}

/// Brent's root finder with pre-evaluated endpoint values.
pub fn brent_root_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<ScalarSolution> {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    brent_root_bracketed(&mut f, &mut a, &mut b, &mut fa, &mut fb, xtol, max_iter)
}

fn brent_root_bracketed<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: &mut f64,
    b: &mut f64,
    fa: &mut f64,
    fb: &mut f64,
    xtol: f64,
    max_iter: usize,
) -> Option<ScalarSolution> {
    if *fa == 0.0 {
        return Some(ScalarSolution { x: *a, fx: 0.0, iterations: 0, converged: true });
    }
    if *fb == 0.0 {
        return Some(ScalarSolution { x: *b, fx: 0.0, iterations: 0, converged: true });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (*a, *fa);
    let mut d = *b - *a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = *a;
            fc = *fa;
            d = *b - *a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            *a = *b;
            *b = c;
            c = *a;
            *fa = *fb;
            *fb = fc;
            fc = *fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - *b);
        if m.abs() <= tol || *fb == 0.0 {
            return Some(ScalarSolution { x: *b, fx: *fb, iterations: iter, converged: true });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = *fb / *fa;
            let (mut p, mut q);
            if *a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = *fa / fc;
                let r = *fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (*b - *a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        *a = *b;
        *fa = *fb;
        *b += if d.abs() > tol { d } else { tol.copysign(m) };
        *fb = f(*b);
    }
    Some(ScalarSolution { x: *b, fx: *fb, iterations: max_iter, converged: false })
}

/// Brent's bounded scalar minimizer (golden section with parabolic steps).
pub fn brent_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    max_iter: usize,
) -> ScalarSolution {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for iter in 1..=max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = 1e-12 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return ScalarSolution { x, fx, iterations: iter, converged: true };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    ScalarSolution { x, fx, iterations: max_iter, converged: false }
}

/// Golden-section minimization on `[lo, hi]`; endpoints are also compared so
/// that boundary minima are returned exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
    }
    (best_x, best_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_exact_polynomial() {
        let xs: Vec<f64> = (0..20).map(|i| -1.0 + i as f64 / 10.0).collect();
        let coeffs = [0.5, -2.0, 0.25, 1.5];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &x in &xs {
            let row: Vec<f64> = (0..4).map(|k| x.powi(k)).collect();
            b.push(row.iter().zip(coeffs).map(|(r, c)| r * c).sum());
            a.extend(row);
        }
        let fit = least_squares(&a, &b, 4).unwrap();
        for (f, c) in fit.iter().zip(coeffs) {
            assert!((f - c).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_rejects_rank_deficient() {
        let a = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let b = [1.0, 2.0, 3.0];
        assert!(least_squares(&a, &b, 2).is_err());
    }

    #[test]
    fn pchip_reproduces_knots_and_preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 1.5, 1.6, 5.0];
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
        let mut prev = p.eval(0.0);
        for k in 1..=400 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn brent_root_linear_and_cubic() {
        let s = brent_root(|x| x - 90.0, 15.0, 165.0, 1e-10, 100).unwrap();
        assert!((s.x - 90.0).abs() < 1e-9);
        let s = brent_root(|x| (x - 5.0).powi(3), 4.0, 7.0, 1e-12, 200).unwrap();
        assert!((s.x - 5.0).abs() < 1e-4);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10, 50).is_none());
    }

    #[test]
    fn brent_minimize_quadratic() {
        let s = brent_minimize(|x| (x - 1.3).powi(2) + 2.0, -4.0, 4.0, 1e-9, 200);
        assert!(s.converged);
        assert!((s.x - 1.3).abs() < 1e-6);
    }

    #[test]
    fn golden_section_hits_boundary_minimum() {
        let (x, fx) = golden_section(|x| x, 2.0, 5.0, 1e-6);
        assert_eq!(x, 2.0);
        assert_eq!(fx, 2.0);
        let (x, _) = golden_section(|x| (x - 3.3).powi(2), 2.0, 5.0, 1e-8);
        assert!((x - 3.3).abs() < 1e-7);
    }
}
