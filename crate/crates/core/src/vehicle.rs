//! Vehicle mass properties, aerodynamic coefficient models and lift/drag
//! accelerations.
//!
//! Angles of attack are in degrees at every interface; the linear model's
//! slopes are per radian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Pchip;

/// One sample of a tabulated aerodynamic database.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroPoint {
    pub alpha_deg: f64,
    pub cl: f64,
    pub cd: f64,
}

/// Aerodynamic coefficient model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AeroModel {
    /// `C_D = cd_alpha * alpha + cd_0`, `C_L = cl_alpha * alpha + cl_0`, alpha in rad.
    Linear { cd_alpha: f64, cd_0: f64, cl_alpha: f64, cl_0: f64 },
    /// Monotone-cubic interpolation through the table points.
    Tabulated {
        table: Vec<AeroPoint>,
        #[serde(skip)]
        interp: Option<Box<(Pchip, Pchip)>>,
    },
}

impl PartialEq for AeroModel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 },
                AeroModel::Linear { cd_alpha: a, cd_0: b, cl_alpha: c, cl_0: d },
            ) => cd_alpha == a && cd_0 == b && cl_alpha == c && cl_0 == d,
            (AeroModel::Tabulated { table: x, .. }, AeroModel::Tabulated { table: y, .. }) => x == y,
            _ => false,
        }
    }
}

impl AeroModel {
    pub fn linear(cd_alpha: f64, cd_0: f64, cl_alpha: f64, cl_0: f64) -> Self {
        AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 }
    }

    /// Builds a tabulated model; points are sorted by angle of attack.
    pub fn tabulated(mut table: Vec<AeroPoint>) -> Result<Self> {
        table.sort_by(|a, b| a.alpha_deg.total_cmp(&b.alpha_deg));
        let interp = build_interp(&table)?;
        Ok(AeroModel::Tabulated { table, interp: Some(Box::new(interp)) })
    }

    /// Rebuilds interpolants after deserialization.
    pub fn prepared(self) -> Result<Self> {
        match self {
            AeroModel::Tabulated { table, .. } => Self::tabulated(table),
            linear => Ok(linear),
        }
    }

    /// Blunt-body-like database: mild quadratics in alpha with L/D from about
    /// 0.2 at -10 deg to 0.4 at -25 deg.
    pub fn default_tabulated() -> Self {
        let table = (0..=20)
            .map(|i| {
                let alpha_deg = -30.0 + 1.5 * i as f64;
                let u = alpha_deg + 10.0;
                AeroPoint {
                    alpha_deg,
                    cl: 0.34 - 0.0128 * u + 0.0001 * u * u,
                    cd: 1.60 + 0.0135 * u + 0.00012 * u * u,
                }
            })
            .collect();
        Self::tabulated(table).expect("default aero table is well formed")
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, AeroModel::Linear { .. })
    }

    pub fn alpha_range(&self) -> Option<(f64, f64)> {
        match self {
            AeroModel::Linear { .. } => None,
            AeroModel::Tabulated { table, .. } => {
                Some((table[0].alpha_deg, table[table.len() - 1].alpha_deg))
            }
        }
    }

    /// Multiplies lift and drag coefficients by the given factors.
    pub fn scaled(&self, cl_factor: f64, cd_factor: f64) -> Self {
        match self {
            AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 } => AeroModel::Linear {
                cd_alpha: cd_alpha * cd_factor,
                cd_0: cd_0 * cd_factor,
                cl_alpha: cl_alpha * cl_factor,
                cl_0: cl_0 * cl_factor,
            },
            AeroModel::Tabulated { table, .. } => {
                let table = table
                    .iter()
                    .map(|p| AeroPoint { alpha_deg: p.alpha_deg, cl: p.cl * cl_factor, cd: p.cd * cd_factor })
                    .collect();
                Self::tabulated(table).expect("scaling preserves table validity")
            }
        }
    }

    /// Lift and drag coefficients at `alpha_deg`.
    pub fn coefficients(&self, alpha_deg: f64) -> Result<(f64, f64)> {
        match self {
            AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 } => {
                let a = alpha_deg.to_radians();
                Ok((cl_alpha * a + cl_0, cd_alpha * a + cd_0))
            }
            AeroModel::Tabulated { table, interp } => {
                let (lo, hi) = (table[0].alpha_deg, table[table.len() - 1].alpha_deg);
                if !(lo..=hi).contains(&alpha_deg) {
                    return Err(Error::AeroOutOfRange { alpha: alpha_deg, lo, hi });
                }
                let (cl, cd) = match interp {
                    Some(b) => (b.0.eval(alpha_deg), b.1.eval(alpha_deg)),
                    None => {
                        let (cl, cd) = build_interp(table)?;
                        (cl.eval(alpha_deg), cd.eval(alpha_deg))
                    }
                };
                Ok((cl, cd))
            }
        }
    }

    /// Reads a tabulated model from CSV rows `(alpha_deg, CL, CD)`.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let rows = crate::harness::io::read_numeric_csv(path, 3)?;
        let table = rows.into_iter().map(|r| AeroPoint { alpha_deg: r[0], cl: r[1], cd: r[2] }).collect();
        Self::tabulated(table)
    }
}

fn build_interp(table: &[AeroPoint]) -> Result<(Pchip, Pchip)> {
    let x: Vec<f64> = table.iter().map(|p| p.alpha_deg).collect();
    let cl = Pchip::new(x.clone(), table.iter().map(|p| p.cl).collect())?;
    let cd = Pchip::new(x, table.iter().map(|p| p.cd).collect())?;
    Ok((cl, cd))
}

/// Free-function form of [`AeroModel::coefficients`].
pub fn coefficients(aero: &AeroModel, alpha_deg: f64) -> Result<(f64, f64)> {
    aero.coefficients(alpha_deg)
}

/// Linear fit of a tabulated database with its worst-case L/D error.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub model: AeroModel,
    /// Largest relative L/D error of the fit over the table points in range.
    pub max_ld_error: f64,
    /// Set when `max_ld_error` exceeds 5%.
    pub warning: Option<String>,
}

/// Least-squares affine fit of `C_L` and `C_D` over the table points inside
/// `alpha_range` (degrees, inclusive).
pub fn fit_linear(aero_table: &AeroModel, alpha_range: (f64, f64)) -> Result<LinearFit> {
    let AeroModel::Tabulated { table, .. } = aero_table else {
        return Err(Error::DegenerateFit("fit_linear needs a tabulated model".into()));
    };
    let (lo, hi) = if alpha_range.0 <= alpha_range.1 { alpha_range } else { (alpha_range.1, alpha_range.0) };
    let pts: Vec<&AeroPoint> = table.iter().filter(|p| p.alpha_deg >= lo && p.alpha_deg <= hi).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least two table points in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.alpha_deg.to_radians()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx <= f64::EPSILON * xm.abs().max(1.0) {
        return Err(Error::DegenerateFit("all angles of attack are equal".into()));
    }
    let affine = |ys: Vec<f64>| {
        let ym = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let slope = sxy / sxx;
        (slope, ym - slope * xm)
    };
    let (cl_alpha, cl_0) = affine(pts.iter().map(|p| p.cl).collect());
    let (cd_alpha, cd_0) = affine(pts.iter().map(|p| p.cd).collect());
    let model = AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 };
    let mut max_ld_error: f64 = 0.0;
    for p in &pts {
        let (cl, cd) = model.coefficients(p.alpha_deg)?;
        let ld_true = p.cl / p.cd;
        let err = ((cl / cd) - ld_true).abs() / ld_true.abs().max(f64::MIN_POSITIVE);
        max_ld_error = max_ld_error.max(err);
    }
    let warning = (max_ld_error > 0.05).then(|| {
        let msg = format!("linear aero fit L/D error {:.2}% exceeds 5%", 100.0 * max_ld_error);
        log::warn!("{msg}");
        msg
    });
    Ok(LinearFit { model, max_ld_error, warning })
}

/// Mass, reference area, aerodynamics and control bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// m^2
    pub s_ref: f64,
    pub aero: AeroModel,
    /// Bank-angle magnitude bounds, deg.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Angle-of-attack bounds, deg.
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl VehicleParams {
    /// 4,063 kg probe with a 4.5 m aeroshell and the default tabulated aero.
    pub fn default_probe() -> Self {
        Self {
            mass: 4063.0,
            s_ref: std::f64::consts::PI * 2.25 * 2.25,
            aero: AeroModel::default_tabulated(),
            sigma_min: 15.0,
            sigma_max: 165.0,
            alpha_min: -25.0,
            alpha_max: -10.0,
        }
    }

    pub fn with_aero(&self, aero: AeroModel) -> Self {
        Self { aero, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("vehicle: {m}")));
        if !(self.mass > 0.0 && self.s_ref > 0.0) {
            return bad("mass and s_ref must be positive".into());
        }
        if !(0.0 <= self.sigma_min && self.sigma_min < self.sigma_max && self.sigma_max <= 180.0) {
            return bad(format!("bank bounds [{}, {}] invalid", self.sigma_min, self.sigma_max));
        }
        if !(-30.0 <= self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max <= 0.0) {
            return bad(format!("alpha bounds [{}, {}] invalid", self.alpha_min, self.alpha_max));
        }
        if let Some((lo, hi)) = self.aero.alpha_range() {
            if self.alpha_min < lo || self.alpha_max > hi {
                return bad("aero table does not cover the alpha bounds".into());
            }
        }
        for k in 0..=10 {
            let a = self.alpha_min + (self.alpha_max - self.alpha_min) * k as f64 / 10.0;
            let (_, cd) = self.aero.coefficients(a)?;
            if !(cd > 0.0) {
                return bad(format!("C_D({a}) = {cd} is not positive"));
            }
        }
        Ok(())
    }

    /// `0.5 * S_ref / m`, the factor multiplying `rho V^2 C`.
    pub fn accel_factor(&self) -> f64 {
        0.5 * self.s_ref / self.mass
    }
}

/// Lift and drag accelerations (m/s^2).
pub fn aero_accel(veh: &VehicleParams, rho: f64, v: f64, alpha_deg: f64) -> Result<(f64, f64)> {
    let (cl, cd) = veh.aero.coefficients(alpha_deg)?;
    let q = veh.accel_factor() * rho * v * v;
    Ok((q * cl, q * cd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_example() -> AeroModel {
        AeroModel::linear(-0.5, 1.2, 0.9, 0.05)
    }

    #[test]
    fn linear_intercepts_and_hand_value() {
        let m = linear_example();
        assert_eq!(m.coefficients(0.0).unwrap(), (0.05, 1.2));
        let (_, cd) = m.coefficients(-17.5).unwrap();
        // 1.2 + (-0.5)(-17.5 deg in rad = -0.305433) = 1.352716
        assert!((cd - 1.352_716_5).abs() < 1e-6);
    }

    #[test]
    fn tabulated_reproduces_linear_knots() {
        let lin = linear_example();
        let table = (0..=10)
            .map(|i| {
                let a = -30.0 + 3.0 * i as f64;
                let (cl, cd) = lin.coefficients(a).unwrap();
                AeroPoint { alpha_deg: a, cl, cd }
            })
            .collect();
        let tab = AeroModel::tabulated(table).unwrap();
        for i in 0..=10 {
            let a = -30.0 + 3.0 * i as f64;
            assert_eq!(tab.coefficients(a).unwrap(), lin.coefficients(a).unwrap());
        }
        assert!(matches!(tab.coefficients(1.0), Err(Error::AeroOutOfRange { .. })));
    }

    #[test]
    fn fit_recovers_exact_linear_model() {
        let lin = linear_example();
        let table = (0..=10)
            .map(|i| {
                let a = -30.0 + 3.0 * i as f64;
                let (cl, cd) = lin.coefficients(a).unwrap();
                AeroPoint { alpha_deg: a, cl, cd }
            })
            .collect();
        let fit = fit_linear(&AeroModel::tabulated(table).unwrap(), (-30.0, 0.0)).unwrap();
        let AeroModel::Linear { cd_alpha, cd_0, cl_alpha, cl_0 } = fit.model else { unreachable!() };
        assert!((cd_alpha + 0.5).abs() < 1e-12 && (cd_0 - 1.2).abs() < 1e-12);
        assert!((cl_alpha - 0.9).abs() < 1e-12 && (cl_0 - 0.05).abs() < 1e-12);
        assert!(fit.max_ld_error < 1e-12);
        assert!(fit.warning.is_none());
    }

    #[test]
    fn fit_with_mild_quadratic_stays_within_five_percent() {
        let table = (0..=15)
            .map(|i| {
                let a = -25.0 + i as f64;
                let r = a.to_radians();
                let cd_lin = 1.5 + 0.3 * r;
                AeroPoint { alpha_deg: a, cl: 0.5 - 0.9 * r * 0.5, cd: cd_lin * (1.0 + 0.01 * (r / 0.436).powi(2)) }
            })
            .collect();
        let fit = fit_linear(&AeroModel::tabulated(table).unwrap(), (-25.0, -10.0)).unwrap();
        assert!(fit.max_ld_error < 0.05);
    }

    #[test]
    fn fit_through_two_points_is_exact() {
        let table = vec![
            AeroPoint { alpha_deg: -20.0, cl: 0.5, cd: 1.4 },
            AeroPoint { alpha_deg: -10.0, cl: 0.3, cd: 1.6 },
        ];
        let fit = fit_linear(&AeroModel::tabulated(table).unwrap(), (-25.0, -5.0)).unwrap();
        assert!((fit.model.coefficients(-20.0).unwrap().0 - 0.5).abs() < 1e-12);
        assert!((fit.model.coefficients(-10.0).unwrap().1 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_range() {
        let tab = AeroModel::default_tabulated();
        assert!(matches!(fit_linear(&tab, (-12.0, -12.0)), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn default_database_spans_expected_lift_to_drag() {
        let tab = AeroModel::default_tabulated();
        let (cl, cd) = tab.coefficients(-10.0).unwrap();
        assert!((cl / cd - 0.21).abs() < 0.03);
        let (cl, cd) = tab.coefficients(-25.0).unwrap();
        assert!((cl / cd - 0.39).abs() < 0.03);
        let fit = fit_linear(&tab, (-25.0, -10.0)).unwrap();
        assert!(fit.max_ld_error < 0.05, "{}", fit.max_ld_error);
        VehicleParams::default_probe().validate().unwrap();
    }

    #[test]
    fn aero_accel_hand_values() {
        let veh = VehicleParams { mass: 4063.0, s_ref: 10.0, ..VehicleParams::default_probe() }
            .with_aero(AeroModel::linear(0.0, 1.5, 0.0, 0.3));
        assert_eq!(aero_accel(&veh, 0.0, 1e4, -15.0).unwrap(), (0.0, 0.0));
        let (_, d) = aero_accel(&veh, 0.01, 1e4, -15.0).unwrap();
        assert!((d - 0.5 * 0.01 * 1e8 * 10.0 * 1.5 / 4063.0).abs() < 1e-9);
        assert!((d - 1845.93).abs() < 0.01);
        let (l2, d2) = aero_accel(&veh, 0.01, 2e4, -15.0).unwrap();
        let (l1, d1) = aero_accel(&veh, 0.01, 1e4, -15.0).unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-12 && (d2 / d1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn drag_slope_sign_follows_cd_alpha() {
        let veh = VehicleParams::default_probe().with_aero(AeroModel::linear(-0.5, 1.2, 0.9, 0.05));
        let mut prev = f64::INFINITY;
        for k in 0..=15 {
            let a = -25.0 + k as f64;
            let (_, d) = aero_accel(&veh, 1e-4, 2e4, a).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn lift_to_drag_is_independent_of_flight_condition() {
        let veh = VehicleParams::default_probe();
        let (l1, d1) = aero_accel(&veh, 1e-5, 2e4, -17.0).unwrap();
        let veh2 = VehicleParams { mass: 900.0, s_ref: 3.0, ..veh.clone() };
        let (l2, d2) = aero_accel(&veh2, 3e-3, 7e3, -17.0).unwrap();
        assert!((l1 / d1 - l2 / d2).abs() < 1e-14);
    }
}
