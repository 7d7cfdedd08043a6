//! Analytic coupled-mode model of two-pump Bragg-scattering conversion.
//!
//! Sign conventions follow the scalar NLSE used by [`crate::ssfm`]: a wave at
//! ω accumulates phase β(ω)z plus its Kerr phase, and the idler is driven by
//! the product of the other three fields. For the plus branch
//! (ω_s + ω₂ = ω₁ + ω_i) the driving phase advances at
//! κ = β_s + β₂ − β₁ − β_i + γ₁P₁ − γ₂P₂. The minus branch is phase
//! conjugation (ω_s + ω_i = ω₁ + ω₂) with κ = β₁ + β₂ − β_s − β_i − (γ₁P₁ + γ₂P₂).

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{fmt_f64, CsvHeader};
use crate::modesolver::DispersionProfile;
use crate::units::{lambda_of, omega_of};

/// Which of the two idlers a calculation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// ω_i = ω₂ + (ω_s − ω₁), the Bragg-scattering idler.
    Plus,
    /// ω_i = ω₂ − (ω_s − ω₁), the phase-conjugation idler.
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMismatch {
    /// rad/m
    pub linear: f64,
    /// rad/m
    pub nonlinear: f64,
    /// rad/m, always `linear + nonlinear`.
    pub total: f64,
}

impl PhaseMismatch {
    pub fn new(linear: f64, nonlinear: f64) -> Self {
        Self {
            linear,
            nonlinear,
            total: linear + nonlinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionResult {
    pub eta: f64,
    pub idler_omega: f64,
    pub branch: Branch,
    pub mismatch: PhaseMismatch,
    /// Coupled-mode gain g, rad/m.
    pub g: f64,
}

/// Two pumps, a weak signal and the waveguide they propagate in.
#[derive(Debug, Clone)]
pub struct BraggScatteringSetup {
    pub omega_p1: f64,
    pub omega_p2: f64,
    pub omega_s: f64,
    /// Pump powers, W.
    pub p1: f64,
    pub p2: f64,
    /// Nonlinear coefficients seen by each pump, W⁻¹m⁻¹.
    pub gamma1: f64,
    pub gamma2: f64,
    pub profile: Arc<DispersionProfile>,
    pub length: f64,
    /// Injected signal power, W. Only used for bookkeeping and by the split-step engine.
    pub signal_power: f64,
}

impl BraggScatteringSetup {
    /// Setup at the given wavelengths with γ read from the profile at each pump.
    /// The signal power defaults to 10⁻⁶ of the weaker pump.
    pub fn from_wavelengths(
        profile: Arc<DispersionProfile>,
        lambda_p1: f64,
        lambda_p2: f64,
        lambda_s: f64,
        p1: f64,
        p2: f64,
        length: f64,
    ) -> Result<Self> {
        for (name, l) in [("pump 1", lambda_p1), ("pump 2", lambda_p2), ("signal", lambda_s)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Domain(format!("{name} wavelength must be positive, got {l}")));
            }
        }
        let (w1, w2) = (omega_of(lambda_p1), omega_of(lambda_p2));
        let setup = Self {
            omega_p1: w1,
            omega_p2: w2,
            omega_s: omega_of(lambda_s),
            p1,
            p2,
            gamma1: profile.gamma_at(w1)?,
            gamma2: profile.gamma_at(w2)?,
            profile,
            length,
            signal_power: default_signal_power(p1, p2),
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        let tones = [
            ("pump 1", self.omega_p1),
            ("pump 2", self.omega_p2),
            ("signal", self.omega_s),
        ];
        for (name, w) in tones {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("{name} frequency must be positive, got {w}")));
            }
            if !self.profile.covers(w) {
                let (min, max) = self.profile.omega_range();
                return Err(Error::OutsideTable { omega: w, min, max });
            }
        }
        if self.omega_p1 == self.omega_p2 || self.omega_p1 == self.omega_s || self.omega_p2 == self.omega_s {
            return Err(Error::Domain("pump and signal frequencies must be distinct".into()));
        }
        for (name, v) in [
            ("pump 1 power", self.p1),
            ("pump 2 power", self.p2),
            ("signal power", self.signal_power),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.length >= 0.0 && self.length.is_finite()) {
            return Err(Error::Domain(format!("length must be non-negative, got {}", self.length)));
        }
        Ok(())
    }

    pub fn idler(&self, branch: Branch) -> Result<f64> {
        let (plus, minus) = idler_frequencies(self.omega_p1, self.omega_p2, self.omega_s)?;
        Ok(match branch {
            Branch::Plus => plus,
            Branch::Minus => minus,
        })
    }

    /// Idler frequency and full phase mismatch of one branch.
    pub fn phase_mismatch(&self, branch: Branch) -> Result<(f64, PhaseMismatch)> {
        let wi = self.idler(branch)?;
        let linear = linear_phase_mismatch(&self.profile, self.omega_p1, self.omega_p2, self.omega_s, wi, branch)?;
        let nonlinear = branch_nonlinear_mismatch(branch, self.gamma1, self.p1, self.gamma2, self.p2);
        Ok((wi, PhaseMismatch::new(linear, nonlinear)))
    }
}

/// 10⁻⁶ of the weaker pump, or 1 nW if both pumps are off.
pub fn default_signal_power(p1: f64, p2: f64) -> f64 {
    let p = 1e-6 * p1.min(p2);
    if p > 0.0 {
        p
    } else {
        1e-9
    }
}

fn check_positive_frequencies(values: &[(&str, f64)]) -> Result<()> {
    for &(name, w) in values {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Domain(format!("{name} frequency must be positive, got {w:e} rad/s")));
        }
    }
    Ok(())
}

/// Wideband idlers ω₂ ± (ω_s − ω₁).
pub fn idler_frequencies(omega_p1: f64, omega_p2: f64, omega_s: f64) -> Result<(f64, f64)> {
    check_positive_frequencies(&[("pump 1", omega_p1), ("pump 2", omega_p2), ("signal", omega_s)])?;
    let detuning = omega_s - omega_p1;
    let plus = omega_p2 + detuning;
    let minus = omega_p2 - detuning;
    check_positive_frequencies(&[("plus idler", plus), ("minus idler", minus)])?;
    Ok((plus, minus))
}

/// Narrowband idlers ω_s ± (ω₂ − ω₁) for two pumps in the same band.
pub fn narrowband_idler(omega_s: f64, omega_p1: f64, omega_p2: f64) -> Result<(f64, f64)> {
    check_positive_frequencies(&[("pump 1", omega_p1), ("pump 2", omega_p2), ("signal", omega_s)])?;
    let split = omega_p2 - omega_p1;
    let plus = omega_s + split;
    let minus = omega_s - split;
    check_positive_frequencies(&[("plus idler", plus), ("minus idler", minus)])?;
    Ok((plus, minus))
}

/// Linear mismatch of the four-wave quadruple, β cubically interpolated.
///
/// The idler must satisfy the branch's energy relation to 1e-12 relative.
pub fn linear_phase_mismatch(
    profile: &DispersionProfile,
    omega_p1: f64,
    omega_p2: f64,
    omega_s: f64,
    omega_i: f64,
    branch: Branch,
) -> Result<f64> {
    let (lhs, rhs) = match branch {
        Branch::Plus => (omega_s + omega_p2, omega_p1 + omega_i),
        Branch::Minus => (omega_s + omega_i, omega_p1 + omega_p2),
    };
    if (lhs - rhs).abs() > 1e-12 * lhs.abs() {
        return Err(Error::Domain(format!(
            "idler {omega_i:e} rad/s violates energy conservation on the {} branch",
            branch.label()
        )));
    }
    let b1 = profile.beta_at(omega_p1)?;
    let b2 = profile.beta_at(omega_p2)?;
    let bs = profile.beta_at(omega_s)?;
    let bi = profile.beta_at(omega_i)?;
    Ok(match branch {
        Branch::Plus => (bs - b1) + (b2 - bi),
        Branch::Minus => (b1 - bs) + (b2 - bi),
    })
}

/// Cross-phase difference γ₁P₁ − γ₂P₂ of the plus branch.
pub fn nonlinear_phase_mismatch(gamma1: f64, p1: f64, gamma2: f64, p2: f64) -> f64 {
    gamma1 * p1 - gamma2 * p2
}

/// Nonlinear mismatch of either branch; the conjugate branch sees −(γ₁P₁ + γ₂P₂).
pub fn branch_nonlinear_mismatch(branch: Branch, gamma1: f64, p1: f64, gamma2: f64, p2: f64) -> f64 {
    match branch {
        Branch::Plus => nonlinear_phase_mismatch(gamma1, p1, gamma2, p2),
        Branch::Minus => -(gamma1 * p1 + gamma2 * p2),
    }
}

/// η(z) = (4γ₁γ₂P₁P₂/g²)·sin²(gz) with g² = 4γ₁γ₂P₁P₂ + (κ/2)². Returns (η, g).
pub fn efficiency_from_mismatch(gamma1: f64, p1: f64, gamma2: f64, p2: f64, kappa: f64, z: f64) -> (f64, f64) {
    let coupling = 4.0 * gamma1 * gamma2 * p1 * p2;
    let g = (coupling + 0.25 * kappa * kappa).sqrt();
    if coupling == 0.0 || g == 0.0 {
        return (0.0, g);
    }
    let s = (g * z).sin();
    ((coupling / (g * g) * s * s).min(1.0), g)
}

/// Conversion efficiency of one branch after a distance `z`.
pub fn conversion_efficiency(setup: &BraggScatteringSetup, branch: Branch, z: f64) -> Result<ConversionResult> {
    setup.validate()?;
    if !(z >= 0.0 && z <= setup.length) {
        return Err(Error::Domain(format!(
            "position {z} m outside [0, {}] m",
            setup.length
        )));
    }
    let (idler_omega, mismatch) = setup.phase_mismatch(branch)?;
    let (eta, g) = efficiency_from_mismatch(setup.gamma1, setup.p1, setup.gamma2, setup.p2, mismatch.total, z);
    Ok(ConversionResult {
        eta,
        idler_omega,
        branch,
        mismatch,
        g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub omega_s: f64,
    pub omega_i: f64,
    pub kappa: f64,
    pub eta: f64,
    pub eta_normalized: f64,
}

/// η at the device output across a signal sweep, normalized to its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchingCurve {
    pub branch: Branch,
    pub points: Vec<CurvePoint>,
}

pub const CURVE_SCHEMA: &str = "phase_matching_curve/1";

impl PhaseMatchingCurve {
    pub fn peak(&self) -> Option<&CurvePoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&CurvePoint>, p| match best {
                Some(b) if b.eta >= p.eta => Some(b),
                _ => Some(p),
            })
    }

    /// Signal-frequency distance between the nulls on either side of the
    /// main lobe, each located by a parabola through the sampled minimum.
    pub fn first_null_width(&self) -> Option<f64> {
        let pts = &self.points;
        let n = pts.len();
        if n < 5 {
            return None;
        }
        let ipk = (0..n).fold(0, |b, i| if pts[i].eta > pts[b].eta { i } else { b });
        let mut left = ipk;
        while left > 0 && pts[left - 1].eta < pts[left].eta {
            left -= 1;
        }
        let mut right = ipk;
        while right + 1 < n && pts[right + 1].eta < pts[right].eta {
            right += 1;
        }
        if left == 0 || right == n - 1 {
            return None;
        }
        let refine = |i: usize| {
            let (x0, x1, x2) = (pts[i - 1].omega_s, pts[i].omega_s, pts[i + 1].omega_s);
            let (y0, y1, y2) = (pts[i - 1].eta, pts[i].eta, pts[i + 1].eta);
            let h = x1 - x0;
            let denom = y0 - 2.0 * y1 + y2;
            if denom.abs() < f64::MIN_POSITIVE || (x2 - x1 - h).abs() > 1e-9 * h.abs() {
                return x1;
            }
            x1 + 0.5 * h * (y0 - y2) / denom
        };
        Some((refine(right) - refine(left)).abs())
    }

    /// Rows sorted by signal wavelength: lambda_s_nm, lambda_i_nm, kappa_rad_m, eta, eta_db.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &CsvHeader) -> std::io::Result<()> {
        header.write(&mut out, "lambda_s_nm,lambda_i_nm,kappa_rad_m,eta,eta_db")?;
        let mut rows: Vec<&CurvePoint> = self.points.iter().collect();
        rows.sort_by(|a, b| b.omega_s.total_cmp(&a.omega_s));
        for p in rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(lambda_of(p.omega_s) * 1e9),
                fmt_f64(lambda_of(p.omega_i) * 1e9),
                fmt_f64(p.kappa),
                fmt_f64(p.eta),
                fmt_f64(10.0 * p.eta.log10())
            )?;
        }
        Ok(())
    }
}

/// Sweep the signal over `n_points` uniform frequencies in `omega_s_range`
/// (inclusive) and evaluate η of `branch` at the device output.
pub fn phase_matching_curve(
    setup: &BraggScatteringSetup,
    omega_s_range: (f64, f64),
    n_points: usize,
    branch: Branch,
) -> Result<PhaseMatchingCurve> {
    if n_points == 0 {
        return Err(Error::Domain("phase-matching sweep needs at least one point".into()));
    }
    let (a, b) = omega_s_range;
    let step = if n_points > 1 { (b - a) / (n_points - 1) as f64 } else { 0.0 };
    let mut points = (0..n_points)
        .into_par_iter()
        .map(|k| {
            let mut s = setup.clone();
            s.omega_s = if k + 1 == n_points && n_points > 1 { b } else { a + step * k as f64 };
            let r = conversion_efficiency(&s, branch, s.length)?;
            Ok(CurvePoint {
                omega_s: s.omega_s,
                omega_i: r.idler_omega,
                kappa: r.mismatch.total,
                eta: r.eta,
                eta_normalized: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = points.iter().fold(0.0f64, |m, p| m.max(p.eta));
    for p in &mut points {
        p.eta_normalized = if max > 0.0 { p.eta / max } else { 0.0 };
    }
    Ok(PhaseMatchingCurve { branch, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionRegime {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiReport {
    pub regime: DispersionRegime,
    pub beta2: f64,
    /// Peak field-amplitude gain, m⁻¹.
    pub peak_gain: f64,
    /// Pump-to-sideband detuning of the peak, rad/s.
    pub peak_detuning: f64,
}

/// Field-amplitude MI gain ½|β₂Ω|·sqrt(4γP/|β₂| − Ω²) of a CW pump; zero
/// outside the gain band or in normal dispersion.
pub fn mi_gain(beta2: f64, gamma: f64, power: f64, detuning: f64) -> f64 {
    if beta2 >= 0.0 || power <= 0.0 {
        return 0.0;
    }
    let cutoff_sq = 4.0 * gamma * power / beta2.abs();
    let d2 = detuning * detuning;
    if d2 >= cutoff_sq {
        return 0.0;
    }
    0.5 * (beta2 * detuning).abs() * (cutoff_sq - d2).sqrt()
}

/// Screen a pump for modulation instability using β₂ at its frequency.
pub fn modulation_instability_check(
    profile: &DispersionProfile,
    omega_pump: f64,
    power: f64,
    gamma: f64,
) -> Result<MiReport> {
    if !(power >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::Domain("pump power and gamma must be non-negative".into()));
    }
    let beta2 = profile.beta2_at(omega_pump)?;
    if beta2 >= 0.0 {
        return Ok(MiReport {
            regime: DispersionRegime::Normal,
            beta2,
            peak_gain: 0.0,
            peak_detuning: 0.0,
        });
    }
    let peak_detuning = (2.0 * gamma * power / beta2.abs()).sqrt();
    Ok(MiReport {
        regime: DispersionRegime::Anomalous,
        beta2,
        peak_gain: gamma * power,
        peak_detuning,
    })
}

/// Full-conversion length π/(2g) at zero mismatch for equal γ and powers.
pub fn full_conversion_length(gamma: f64, p1: f64, p2: f64) -> f64 {
    PI / (4.0 * gamma * (p1 * p2).sqrt())
}
