use rayon::prelude::*;

use super::{nonlinear_coefficient, solve_eim, Polarization, WaveguideGeometry};
use crate::calculus::{bisect, interp_linear, second_derivative_on_grid, CubicSpline};
use crate::error::{ensure_positive, Error, Result};
use crate::materials::MaterialDb;
use crate::units::{d_from_beta2, lambda_of, omega_of, DispersionParameterD, SPEED_OF_LIGHT};

/// Smallest table accepted by [`propagation_constant_table`].
pub const MIN_TABLE_POINTS: usize = 64;

/// β(ω) tabulated on a uniform angular-frequency grid, plus derived β₂ and γ.
#[derive(Debug, Clone)]
pub struct DispersionProfile {
    /// Geometry the table was computed for; `None` for synthetic profiles.
    pub geometry: Option<WaveguideGeometry>,
    pub polarization: Polarization,
    /// Ascending angular frequencies, rad/s.
    pub omega: Vec<f64>,
    pub n_eff: Vec<f64>,
    /// Propagation constant, rad/m.
    pub beta: Vec<f64>,
    /// Group-velocity dispersion by finite differences, s²/m.
    pub beta2: Vec<f64>,
    /// Nonlinear coefficient, W⁻¹m⁻¹.
    pub gamma: Vec<f64>,
    beta_spline: CubicSpline,
    beta2_spline: CubicSpline,
}

impl DispersionProfile {
    /// Profile from a tabulated β(ω). `omega` must be strictly increasing.
    pub fn from_beta(omega: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != omega.len() {
            return Err(Error::Shape(format!(
                "gamma has {} entries, omega has {}",
                gamma.len(),
                omega.len()
            )));
        }
        let beta2 = second_derivative_on_grid(&omega, &beta)?;
        let beta_spline = CubicSpline::new(&omega, &beta)?;
        let beta2_spline = CubicSpline::new(&omega, &beta2)?;
        let n_eff = omega
            .iter()
            .zip(&beta)
            .map(|(w, b)| b * SPEED_OF_LIGHT / w)
            .collect();
        Ok(Self {
            geometry: None,
            polarization: Polarization::TE,
            omega,
            n_eff,
            beta,
            beta2,
            gamma,
            beta_spline,
            beta2_spline,
        })
    }

    /// Synthetic profile sampled from a closure over `[omega_min, omega_max]`.
    pub fn from_fn<F>(omega_min: f64, omega_max: f64, n_points: usize, beta: F, gamma: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        if !(omega_max > omega_min) || n_points < 5 {
            return Err(Error::Domain(format!(
                "need omega_max > omega_min and at least 5 points, got [{omega_min:e}, {omega_max:e}] with {n_points}"
            )));
        }
        let step = (omega_max - omega_min) / (n_points - 1) as f64;
        let omega: Vec<f64> = (0..n_points).map(|i| omega_min + step * i as f64).collect();
        let b = omega.iter().map(|&w| beta(w)).collect();
        Self::from_beta(omega, b, vec![gamma; n_points])
    }

    pub fn omega_range(&self) -> (f64, f64) {
        self.beta_spline.domain()
    }

    /// Wavelength coverage in metres, ascending.
    pub fn wavelength_range(&self) -> (f64, f64) {
        let (lo, hi) = self.omega_range();
        (lambda_of(hi), lambda_of(lo))
    }

    pub fn covers(&self, omega: f64) -> bool {
        self.beta_spline.contains(omega)
    }

    fn check(&self, omega: f64) -> Result<()> {
        if self.covers(omega) {
            Ok(())
        } else {
            let (min, max) = self.omega_range();
            Err(Error::OutsideTable { omega, min, max })
        }
    }

    pub fn beta_at(&self, omega: f64) -> Result<f64> {
        self.check(omega)?;
        Ok(self.beta_spline.eval(omega))
    }

    /// Inverse group velocity dβ/dω, s/m.
    pub fn beta1_at(&self, omega: f64) -> Result<f64> {
        self.check(omega)?;
        Ok(self.beta_spline.derivative(omega))
    }

    pub fn beta2_at(&self, omega: f64) -> Result<f64> {
        self.check(omega)?;
        Ok(self.beta2_spline.eval(omega))
    }

    pub fn gamma_at(&self, omega: f64) -> Result<f64> {
        self.check(omega)?;
        Ok(interp_linear(&self.omega, &self.gamma, omega))
    }

    pub fn n_eff_at(&self, omega: f64) -> Result<f64> {
        Ok(self.beta_at(omega)? * SPEED_OF_LIGHT / omega)
    }

    /// Dispersion parameter D at a wavelength.
    pub fn d_at(&self, lambda: f64) -> Result<DispersionParameterD> {
        ensure_positive("wavelength", lambda)?;
        Ok(d_from_beta2(self.beta2_at(omega_of(lambda))?, lambda))
    }

    /// β(ω) continued linearly past the table ends with the end slopes.
    pub fn beta_extrapolated(&self, omega: f64) -> f64 {
        let (lo, hi) = self.omega_range();
        let edge = omega.clamp(lo, hi);
        let (value, slope, _) = self.beta_spline.eval_all(edge);
        value + slope * (omega - edge)
    }
}

/// Tabulate β, β₂ and γ of `geometry` on `n_points` uniform ω samples
/// spanning `band` (wavelengths in metres, either order).
pub fn propagation_constant_table(
    db: &MaterialDb,
    geometry: &WaveguideGeometry,
    band: (f64, f64),
    n_points: usize,
    polarization: Polarization,
    n2: f64,
) -> Result<DispersionProfile> {
    geometry.validate(db)?;
    ensure_positive("n2", n2)?;
    let (l0, l1) = (band.0.min(band.1), band.0.max(band.1));
    ensure_positive("band edge", l0)?;
    if !(l1 > l0) {
        return Err(Error::Domain("wavelength band has zero width".into()));
    }
    if n_points < MIN_TABLE_POINTS {
        return Err(Error::Domain(format!(
            "table needs at least {MIN_TABLE_POINTS} points, got {n_points}"
        )));
    }
    let (w_min, w_max) = (omega_of(l1), omega_of(l0));
    let step = (w_max - w_min) / (n_points - 1) as f64;
    let omega: Vec<f64> = (0..n_points).map(|i| w_min + step * i as f64).collect();

    let solved: Vec<Result<(f64, f64)>> = omega
        .par_iter()
        .map(|&w| {
            let lambda = lambda_of(w);
            let mode = solve_eim(db, geometry, lambda, polarization)?;
            let a_eff = mode.vertical.effective_width() * mode.lateral.effective_width();
            Ok((mode.n_eff, nonlinear_coefficient(a_eff, n2, lambda)?))
        })
        .collect();

    // Report the shortest failing wavelength, i.e. the highest frequency.
    if let Some(err) = solved.iter().rev().find_map(|r| r.as_ref().err()) {
        return Err(err.clone());
    }
    let (n_eff, gamma): (Vec<f64>, Vec<f64>) = solved.into_iter().map(|r| r.unwrap()).unzip();
    let beta = omega
        .iter()
        .zip(&n_eff)
        .map(|(w, n)| n * w / SPEED_OF_LIGHT)
        .collect();
    let mut profile = DispersionProfile::from_beta(omega, beta, gamma)?;
    profile.n_eff = n_eff;
    profile.geometry = Some(geometry.clone());
    profile.polarization = polarization;
    Ok(profile)
}

/// Every wavelength inside the table where β₂ changes sign, ascending, in metres.
pub fn zero_dispersion_wavelength(profile: &DispersionProfile) -> Vec<f64> {
    const SUBDIVISIONS: usize = 8;
    let f = |w: f64| profile.beta2_spline.eval(w);
    let mut roots = Vec::new();
    for pair in profile.omega.windows(2) {
        let h = (pair[1] - pair[0]) / SUBDIVISIONS as f64;
        for s in 0..SUBDIVISIONS {
            let a = pair[0] + h * s as f64;
            let b = if s + 1 == SUBDIVISIONS { pair[1] } else { a + h };
            let (fa, fb) = (f(a), f(b));
            if fa == 0.0 && s == 0 && roots.is_empty() {
                roots.push(a);
            }
            if fa.signum() != fb.signum() && fb != 0.0 {
                if let Ok(w) = bisect(f, a, b, a * 1e-14) {
                    roots.push(w);
                }
            }
        }
    }
    let mut lambdas: Vec<f64> = roots.into_iter().map(lambda_of).collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lambdas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    lambdas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modesolver::DEFAULT_N2;

    fn reference_table(n: usize) -> DispersionProfile {
        propagation_constant_table(
            &MaterialDb::bundled(),
            &WaveguideGeometry::default(),
            (900e-9, 2000e-9),
            n,
            Polarization::TE,
            DEFAULT_N2,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_beta_gives_constant_beta2() {
        let w0 = 1.2e15;
        let b2 = 3.0e-25;
        let p = DispersionProfile::from_fn(1.0e15, 1.4e15, 101, |w| 5e6 + 7e-9 * (w - w0) + 0.5 * b2 * (w - w0).powi(2), 1.0)
            .unwrap();
        for &w in &[1.01e15, 1.2e15, 1.3333e15] {
            assert!((p.beta2_at(w).unwrap() - b2).abs() < 1e-9 * b2);
            assert!((p.beta1_at(w).unwrap() - (7e-9 + b2 * (w - w0))).abs() < 1e-18);
        }
        assert!(matches!(p.beta_at(0.9e15), Err(Error::OutsideTable { .. })));
        assert!(zero_dispersion_wavelength(&p).is_empty());
    }

    #[test]
    fn linear_beta2_crossing_is_found() {
        // β = c3·(ω-ωz)³/6 has β₂ = c3·(ω-ωz), zero at ωz.
        let wz = omega_of(1.3e-6);
        let p = DispersionProfile::from_fn(omega_of(1.7e-6), omega_of(1.0e-6), 200, |w| 1e-40 * (w - wz).powi(3) / 6.0, 1.0)
            .unwrap();
        let z = zero_dispersion_wavelength(&p);
        assert_eq!(z.len(), 1, "{z:?}");
        assert!((z[0] - 1.3e-6).abs() < 1e-12, "{}", z[0]);
    }

    #[test]
    fn extrapolation_is_linear_past_ends() {
        let p = DispersionProfile::from_fn(1.0e15, 1.4e15, 64, |w| 2e-8 * w + 1e-31 * w * w, 1.0).unwrap();
        let (lo, hi) = p.omega_range();
        let d = 1e13;
        let slope = p.beta1_at(hi).unwrap();
        assert!((p.beta_extrapolated(hi + d) - (p.beta_at(hi).unwrap() + slope * d)).abs() < 1e-6);
        assert!((p.beta_extrapolated(lo) - p.beta_at(lo).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_tables_and_bad_bands() {
        let db = MaterialDb::bundled();
        let g = WaveguideGeometry::default();
        let short = propagation_constant_table(&db, &g, (1e-6, 2e-6), 10, Polarization::TE, DEFAULT_N2);
        assert!(matches!(short, Err(Error::Domain(_))));
        let flat = propagation_constant_table(&db, &g, (1e-6, 1e-6), 128, Polarization::TE, DEFAULT_N2);
        assert!(flat.is_err());
    }

    #[test]
    fn cut_off_reports_first_failing_wavelength() {
        let db = MaterialDb::bundled();
        let g = WaveguideGeometry::nitride_strip(300e-9, 300e-9);
        let err = propagation_constant_table(&db, &g, (600e-9, 3000e-9), 64, Polarization::TE, DEFAULT_N2).unwrap_err();
        assert!(matches!(err, Error::NoGuidedMode { .. }), "{err}");
    }

    #[test]
    fn beta2_is_self_convergent() {
        let coarse = reference_table(128);
        let fine = reference_table(512);
        for nm in [1000.0, 1300.0, 1550.0, 1800.0] {
            let w = omega_of(nm * 1e-9);
            let (a, b) = (coarse.beta2_at(w).unwrap(), fine.beta2_at(w).unwrap());
            let scale = fine.beta2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((a - b).abs() < 1e-3 * scale, "{nm} nm: {a:e} vs {b:e}");
        }
    }

    #[test]
    fn table_is_consistent_with_pointwise_solver() {
        let db = MaterialDb::bundled();
        let g = WaveguideGeometry::default();
        let p = reference_table(128);
        let w = p.omega[40];
        let n = crate::modesolver::effective_index(&db, &g, lambda_of(w), Polarization::TE).unwrap();
        assert!((p.n_eff[40] - n).abs() < 1e-14);
        assert!((p.n_eff_at(w).unwrap() - n).abs() < 1e-12);
    }

    #[test]
    fn reference_geometry_dispersion_landmarks() {
        let p = reference_table(256);
        let roots = zero_dispersion_wavelength(&p);
        assert!(!roots.is_empty());
        let first = roots[0] * 1e9;
        assert!((1000.0..1400.0).contains(&first), "ZDW {roots:?}");
        for nm in [980.0, 1550.0] {
            let d = p.d_at(nm * 1e-9).unwrap().ps_per_nm_km();
            assert!(d < 0.0, "{nm} nm is not normal: D = {d}");
        }
    }
}
