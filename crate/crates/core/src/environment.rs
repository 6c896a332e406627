//! Planet constants, gravity, atmospheric density and the stochastic
//! atmosphere dispersion model.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::least_squares;

/// Central body: gravitational parameter, spin rate and reference radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanetModel {
    /// Gravitational parameter, m^3/s^2.
    pub mu: f64,
    /// Spin rate, rad/s.
    pub omega: f64,
    /// Equatorial radius, m. Altitudes are measured from this radius.
    pub r_eq: f64,
    /// Atmospheric interface radius, m.
    pub r_atm: f64,
    /// Zonal harmonic J2. Zero selects the spherical (inverse-square) field.
    #[serde(default)]
    pub j2: f64,
}

impl PlanetModel {
    /// Uranus with a 1,000 km entry interface.
    pub fn uranus() -> Self {
        let r_eq = 25_559e3;
        Self { mu: 5.793939e15, omega: 1.0124e-4, r_eq, r_atm: r_eq + 1_000e3, j2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0 && self.r_eq > 0.0 && self.r_atm > self.r_eq && self.omega >= 0.0;
        if ok && self.j2.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("planet model violates invariants: {self:?}")))
        }
    }

    pub fn altitude(&self, r: f64) -> f64 {
        r - self.r_eq
    }

    pub fn non_rotating(&self) -> Self {
        Self { omega: 0.0, ..self.clone() }
    }
}

/// Radial (inward-positive) and meridional gravity components at radius `r`
/// and latitude `phi`. The meridional component follows the sign used in the
/// equations of motion: positive values point toward the equator in the
/// northern hemisphere.
pub fn gravity(planet: &PlanetModel, r: f64, phi: f64) -> (f64, f64) {
    let g0 = planet.mu / (r * r);
    if planet.j2 == 0.0 {
        return (g0, 0.0);
    }
    let ratio2 = (planet.r_eq / r).powi(2);
    let (s, c) = phi.sin_cos();
    let g_r = g0 * (1.0 + 1.5 * planet.j2 * ratio2 * (1.0 - 3.0 * s * s));
    let g_phi = 3.0 * g0 * planet.j2 * ratio2 * s * c;
    (g_r, g_phi)
}

/// Base density profile shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityProfile {
    /// `rho0 * exp(-h / h_scale)`.
    Exponential { rho0: f64, h_scale: f64 },
    /// `ln rho` as a polynomial in the normalized altitude
    /// `x = (2h - (h_min + h_max)) / (h_max - h_min)`, coefficients in
    /// ascending powers of `x`.
    LogPolynomial { coeffs: Vec<f64> },
}

/// Piecewise-linear additive perturbation of `ln rho` on a uniform altitude grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPerturbation {
    pub h_start: f64,
    pub h_step: f64,
    pub values: Vec<f64>,
}

impl LogPerturbation {
    fn eval(&self, h: f64) -> (f64, f64) {
        let n = self.values.len();
        if n == 1 {
            return (self.values[0], 0.0);
        }
        let u = (h - self.h_start) / self.h_step;
        if u < 0.0 {
            return (self.values[0], 0.0);
        }
        if u >= (n - 1) as f64 {
            return (self.values[n - 1], 0.0);
        }
        let i = u.floor() as usize;
        let w = u - i as f64;
        let slope = (self.values[i + 1] - self.values[i]) / self.h_step;
        (self.values[i] + w * (self.values[i + 1] - self.values[i]), slope)
    }
}

/// Atmospheric density model over a validity band `[h_min, h_max]`.
///
/// Above `h_max` the log-polynomial kind continues as an exponential matching
/// value and slope at `h_max`. A global multiplier and an optional log-density
/// perturbation realize dispersed atmospheres; both are neutral by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereModel {
    pub profile: DensityProfile,
    pub h_min: f64,
    pub h_max: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<LogPerturbation>,
}

fn unit_scale() -> f64 {
    1.0
}

impl AtmosphereModel {
    pub fn exponential(rho0: f64, h_scale: f64, h_min: f64, h_max: f64) -> Self {
        Self {
            profile: DensityProfile::Exponential { rho0, h_scale },
            h_min,
            h_max,
            scale: 1.0,
            perturbation: None,
        }
    }

    /// Nominal Uranus-like exponential atmosphere (altitude above `r_eq`).
    pub fn uranus_nominal() -> Self {
        Self::exponential(0.3, 24.0e3, 0.0, 1_200e3)
    }

    /// Copy with the global density multiplier multiplied by `factor`.
    pub fn with_scale(&self, factor: f64) -> Self {
        Self { scale: self.scale * factor, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("atmosphere: {m}")));
        if !(self.h_max > self.h_min) {
            return bad("h_max must exceed h_min");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        match &self.profile {
            DensityProfile::Exponential { rho0, h_scale } => {
                if !(*rho0 > 0.0 && *h_scale > 0.0) {
                    return bad("rho0 and h_scale must be positive");
                }
            }
            DensityProfile::LogPolynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return bad("log-polynomial coefficients must be finite and non-empty");
                }
            }
        }
        Ok(())
    }

    /// Density at altitude `h` (m).
    pub fn density(&self, h: f64) -> Result<f64> {
        self.density_with_slope(h).map(|(rho, _)| rho)
    }

    /// Density and its altitude derivative `d rho / dh`.
    pub fn density_with_slope(&self, h: f64) -> Result<(f64, f64)> {
        if h < self.h_min {
            return Err(Error::BelowAtmosphere { altitude: h, floor: self.h_min });
        }
        let (ln_base, dln_base) = match &self.profile {
            DensityProfile::Exponential { rho0, h_scale } => {
                (rho0.ln() - h / h_scale, -1.0 / h_scale)
            }
            DensityProfile::LogPolynomial { coeffs } => {
                let half = 0.5 * (self.h_max - self.h_min);
                let mid = 0.5 * (self.h_max + self.h_min);
                if h <= self.h_max {
                    let (p, dp) = poly_with_derivative(coeffs, (h - mid) / half);
                    (p, dp / half)
                } else {
                    let (p, dp) = poly_with_derivative(coeffs, 1.0);
                    let slope = (dp / half).min(-1e-9);
                    (p + slope * (h - self.h_max), slope)
                }
            }
        };
        let (dln_pert, dpert) = match &self.perturbation {
            Some(p) => p.eval(h),
            None => (0.0, 0.0),
        };
        let rho = self.scale * (ln_base + dln_pert).exp();
        Ok((rho, rho * (dln_base + dpert)))
    }
}

/// Density lookup for inner integration loops. Returns exactly what
/// [`AtmosphereModel::density`] does, skipping the log of `rho0` for an
/// unperturbed exponential.
#[derive(Debug, Clone, Copy)]
pub struct DensityEval<'a> {
    atm: &'a AtmosphereModel,
    exp: Option<(f64, f64)>,
}

impl<'a> DensityEval<'a> {
    pub fn new(atm: &'a AtmosphereModel) -> Self {
        let exp = match (&atm.profile, &atm.perturbation) {
            (DensityProfile::Exponential { rho0, h_scale }, None) => Some((rho0.ln(), *h_scale)),
            _ => None,
        };
        Self { atm, exp }
    }

    pub fn density(&self, h: f64) -> Result<f64> {
        match self.exp {
            Some((ln_rho0, h_scale)) if h >= self.atm.h_min => Ok(self.atm.scale * (ln_rho0 - h / h_scale).exp()),
            _ => self.atm.density(h),
        }
    }
}

fn poly_with_derivative(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Density at altitude `h`, see [`AtmosphereModel::density`].
pub fn density(atm: &AtmosphereModel, h: f64) -> Result<f64> {
    atm.density(h)
}

/// Least-squares polynomial fit of `ln rho` against altitude over the band
/// spanned by the samples.
pub fn fit_log_polynomial(altitudes: &[f64], densities: &[f64], order: usize) -> Result<AtmosphereModel> {
    if altitudes.len() != densities.len() || altitudes.len() < order + 1 {
        return Err(Error::DegenerateFit(format!(
            "need at least {} density samples for order {order}",
            order + 1
        )));
    }
    if densities.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateFit("densities must be positive".into()));
    }
    let h_min = altitudes.iter().copied().fold(f64::INFINITY, f64::min);
    let h_max = altitudes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(h_max > h_min) {
        return Err(Error::DegenerateFit("altitude samples span zero width".into()));
    }
    let half = 0.5 * (h_max - h_min);
    let mid = 0.5 * (h_max + h_min);
    let cols = order + 1;
    let mut design = Vec::with_capacity(altitudes.len() * cols);
    for &h in altitudes {
        let x = (h - mid) / half;
        let mut xp = 1.0;
        for _ in 0..cols {
            design.push(xp);
            xp *= x;
        }
    }
    let rhs: Vec<f64> = densities.iter().map(|d| d.ln()).collect();
    let coeffs = least_squares(&design, &rhs, cols)?;
    Ok(AtmosphereModel {
        profile: DensityProfile::LogPolynomial { coeffs },
        h_min,
        h_max,
        scale: 1.0,
        perturbation: None,
    })
}

/// Reads a two-column CSV (altitude m, density kg/m^3). A non-numeric first
/// line is treated as a header.
pub fn load_density_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = crate::harness::io::read_numeric_csv(path, 2)?;
    Ok(rows.into_iter().map(|r| (r[0], r[1])).unzip())
}

/// Stochastic atmosphere dispersion: a lognormal global multiplier and an
/// altitude-correlated Gaussian perturbation of `ln rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereDispersion {
    /// 1-sigma of `ln` of the global density multiplier.
    pub scale_sigma: f64,
    /// Correlation length of the altitude-dependent perturbation, m.
    pub corr_altitude: f64,
    /// 1-sigma of the altitude-dependent `ln rho` perturbation.
    pub perturb_sigma: f64,
    /// Stream selector mixed into every per-run seed.
    #[serde(default)]
    pub seed: u64,
    /// Upper altitude of the perturbation grid, m; the perturbation is held
    /// constant above it.
    #[serde(default = "default_grid_top")]
    pub grid_top: f64,
}

fn default_grid_top() -> f64 {
    1_200e3
}

impl Default for AtmosphereDispersion {
    fn default() -> Self {
        Self { scale_sigma: 0.0, corr_altitude: 40e3, perturb_sigma: 0.0, seed: 0, grid_top: default_grid_top() }
    }
}

impl AtmosphereDispersion {
    pub fn validate(&self) -> Result<()> {
        let ok = self.scale_sigma >= 0.0
            && self.perturb_sigma >= 0.0
            && (self.perturb_sigma == 0.0 || self.corr_altitude > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("atmosphere dispersion: {self:?}")))
        }
    }
}

/// Draws a dispersed atmosphere. Pure function of `(nominal, disp, seed)`;
/// with all sigmas zero the nominal model is returned unchanged.
pub fn sample_atmosphere(nominal: &AtmosphereModel, disp: &AtmosphereDispersion, seed: u64) -> AtmosphereModel {
    let mut out = nominal.clone();
    if disp.scale_sigma == 0.0 && disp.perturb_sigma == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ disp.seed.rotate_left(32));
    let z: f64 = StandardNormal.sample(&mut rng);
    if disp.scale_sigma > 0.0 {
        out.scale *= (disp.scale_sigma * z).exp();
    }
    if disp.perturb_sigma > 0.0 {
        let step = (disp.corr_altitude / 4.0).max(1.0);
        let top = disp.grid_top.max(nominal.h_min + step);
        let n = ((top - nominal.h_min) / step).ceil() as usize + 1;
        // AR(1) realization of an exponentially correlated process on the grid.
        let corr = (-step / disp.corr_altitude).exp();
        let innov = (1.0 - corr * corr).sqrt();
        let mut values = Vec::with_capacity(n);
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut x = disp.perturb_sigma * z0;
        for _ in 0..n {
            values.push(x);
            let e: f64 = StandardNormal.sample(&mut rng);
            x = corr * x + innov * disp.perturb_sigma * e;
        }
        out.perturbation = Some(LogPerturbation { h_start: nominal.h_min, h_step: step, values });
    }
    out
}
