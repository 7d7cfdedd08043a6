use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{solve_eim, Polarization, WaveguideGeometry};
use crate::error::{ensure_positive, Error, Result};
use crate::materials::MaterialDb;

/// Nonlinear effective area, m².
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EffectiveArea(f64);

impl EffectiveArea {
    /// Plausible range for guided strip modes, m².
    pub const SANITY_RANGE: (f64, f64) = (0.05e-12, 100e-12);

    pub fn new(m2: f64) -> Result<Self> {
        ensure_positive("effective area", m2)?;
        Ok(Self(m2))
    }

    pub fn m2(self) -> f64 {
        self.0
    }

    pub fn um2(self) -> f64 {
        self.0 * 1e12
    }
}

/// A_eff = (∬|E|²)² / ∬|E|⁴ of the separable EIM field X(x)·Y(y).
///
/// Each factor is a slab cos/exp profile integrated in closed form, so the
/// area is the product of the two one-dimensional effective widths.
pub fn effective_area(
    db: &MaterialDb,
    geometry: &WaveguideGeometry,
    lambda: f64,
    polarization: Polarization,
) -> Result<EffectiveArea> {
    let mode = solve_eim(db, geometry, lambda, polarization)?;
    let area = mode.vertical.effective_width() * mode.lateral.effective_width();
    let (lo, hi) = EffectiveArea::SANITY_RANGE;
    if !(area >= lo && area <= hi) {
        return Err(Error::Numerical(format!(
            "effective area {:.4} µm² outside the plausible range [{}, {}] µm²",
            area * 1e12,
            lo * 1e12,
            hi * 1e12
        )));
    }
    EffectiveArea::new(area)
}

/// Effective area of a separable profile sampled on two uniform grids.
///
/// `x_field` and `y_field` are field amplitudes with sample spacings `dx`, `dy`.
pub fn effective_area_sampled(x_field: &[f64], dx: f64, y_field: &[f64], dy: f64) -> Result<EffectiveArea> {
    let width = |f: &[f64], h: f64| -> f64 {
        let m2: f64 = f.iter().map(|e| e * e).sum::<f64>() * h;
        let m4: f64 = f.iter().map(|e| e.powi(4)).sum::<f64>() * h;
        m2 * m2 / m4
    };
    if x_field.is_empty() || y_field.is_empty() {
        return Err(Error::Shape("empty field profile".into()));
    }
    EffectiveArea::new(width(x_field, dx) * width(y_field, dy))
}

/// γ = 2πn₂ / (λ·A_eff), in W⁻¹m⁻¹.
pub fn nonlinear_coefficient(a_eff: f64, n2: f64, lambda: f64) -> Result<f64> {
    ensure_positive("effective area", a_eff)?;
    ensure_positive("n2", n2)?;
    ensure_positive("wavelength", lambda)?;
    Ok(2.0 * PI * n2 / (lambda * a_eff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modesolver::DEFAULT_N2;

    #[test]
    fn gaussian_area_is_pi_wx_wy() {
        // exp(-x²/w²) has (∫E²)²/∫E⁴ = w·√π per axis.
        let (wx, wy) = (0.8e-6, 0.35e-6);
        let n = 8192;
        let sample = |w: f64| {
            let span = 12.0 * w;
            let h = span / n as f64;
            let f: Vec<f64> = (0..n)
                .map(|i| {
                    let x = -span / 2.0 + (i as f64 + 0.5) * h;
                    (-(x * x) / (w * w)).exp()
                })
                .collect();
            (f, h)
        };
        let (fx, hx) = sample(wx);
        let (fy, hy) = sample(wy);
        let a = effective_area_sampled(&fx, hx, &fy, hy).unwrap().m2();
        let exact = PI * wx * wy;
        assert!(((a - exact) / exact).abs() < 1e-4, "{a} vs {exact}");
    }

    #[test]
    fn closed_form_area_matches_512_squared_grid() {
        let db = MaterialDb::bundled();
        let g = WaveguideGeometry::default();
        let lambda = 1.55e-6;
        let mode = solve_eim(&db, &g, lambda, Polarization::TE).unwrap();
        let grid = |m: &crate::modesolver::SlabMode| {
            let lo = -10.0 / m.decay_substrate;
            let hi = m.thickness + 10.0 / m.decay_cover;
            let n = 512;
            let h = (hi - lo) / n as f64;
            let f: Vec<f64> = (0..n).map(|i| m.field(lo + (i as f64 + 0.5) * h)).collect();
            (f, h)
        };
        let (fy, hy) = grid(&mode.vertical);
        let (fx, hx) = grid(&mode.lateral);
        let sampled = effective_area_sampled(&fx, hx, &fy, hy).unwrap().m2();
        let exact = effective_area(&db, &g, lambda, Polarization::TE).unwrap().m2();
        assert!(((sampled - exact) / exact).abs() < 1e-4, "{sampled} vs {exact}");
    }

    #[test]
    fn area_grows_with_wavelength() {
        let db = MaterialDb::bundled();
        let g = WaveguideGeometry::default();
        let mut prev = 0.0;
        for nm in (1200..=1600).step_by(20) {
            let a = effective_area(&db, &g, nm as f64 * 1e-9, Polarization::TE).unwrap().m2();
            assert!(a > prev, "A_eff not increasing at {nm} nm");
            prev = a;
        }
    }

    #[test]
    fn reference_geometry_area_is_bounded() {
        let db = MaterialDb::bundled();
        let a = effective_area(&db, &WaveguideGeometry::default(), 1.55e-6, Polarization::TE)
            .unwrap()
            .um2();
        assert!((0.1..=1.5).contains(&a), "A_eff = {a} µm²");
    }

    #[test]
    fn gamma_from_quoted_area() {
        let g = nonlinear_coefficient(0.169e-12, DEFAULT_N2, 1.55e-6).unwrap();
        assert!((g - 6.0).abs() < 0.01, "γ = {g}");
        let half = nonlinear_coefficient(2.0 * 0.169e-12, DEFAULT_N2, 1.55e-6).unwrap();
        assert!((half - g / 2.0).abs() < 1e-12);
        assert!(nonlinear_coefficient(0.0, DEFAULT_N2, 1.55e-6).is_err());
        assert!(nonlinear_coefficient(1e-12, -1.0, 1.55e-6).is_err());
    }
}
