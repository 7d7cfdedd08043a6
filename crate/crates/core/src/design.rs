//! Inverse design: waveguide width from a zero-dispersion target, pump
//! placement checks and the pump power needed for a conversion target.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::bisect;
use crate::cmt::{default_signal_power, BraggScatteringSetup, Branch};
use crate::error::{Error, Result};
use crate::export::TOOL_VERSION;
use crate::materials::MaterialDb;
use crate::modesolver::{
    propagation_constant_table, zero_dispersion_wavelength, DispersionProfile, Polarization, WaveguideGeometry,
    DEFAULT_N2,
};
use crate::ssfm::{bs_conversion_experiment, ExperimentPolicy};
use crate::units::omega_of;

pub const REPORT_SCHEMA: &str = "design_report/1";

/// |D| below this, in ps/(nm·km), earns a near-zero-dispersion caveat.
pub const NEAR_ZERO_D: f64 = 5.0;

/// Single-photon emitters with shipped presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emitter {
    /// Nitrogen-vacancy centre in diamond.
    Nv637,
    /// Rubidium D2 line.
    Rb780,
    /// Caesium D2 line.
    Cs852,
    /// InAs quantum dot.
    Qd980,
}

impl Emitter {
    pub const ALL: [Emitter; 4] = [Emitter::Nv637, Emitter::Rb780, Emitter::Cs852, Emitter::Qd980];

    pub fn name(self) -> &'static str {
        match self {
            Emitter::Nv637 => "nv637",
            Emitter::Rb780 => "rb780",
            Emitter::Cs852 => "cs852",
            Emitter::Qd980 => "qd980",
        }
    }

    /// Emission wavelength, m.
    pub fn wavelength(self) -> f64 {
        match self {
            Emitter::Nv637 => 637e-9,
            Emitter::Rb780 => 780e-9,
            Emitter::Cs852 => 852e-9,
            Emitter::Qd980 => 980e-9,
        }
    }

    pub fn preset_names() -> String {
        Self::ALL.iter().map(|e| e.name()).collect::<Vec<_>>().join(", ")
    }
}

impl FromStr for Emitter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Domain(format!("unknown emitter '{s}'; presets: {}", Self::preset_names())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignTarget {
    /// Emitter wavelength, m.
    pub lambda_sps: f64,
    /// Telecom pump wavelength, m.
    pub lambda_telecom: f64,
    /// Core height, m.
    pub height: f64,
    /// Device length, m.
    pub length: f64,
    pub eta_target: f64,
    /// Pump 1 sits this far above the emitter wavelength, m.
    pub pump_offset: f64,
}

impl DesignTarget {
    pub fn new(lambda_sps: f64) -> Self {
        Self {
            lambda_sps,
            lambda_telecom: 1550e-9,
            height: 550e-9,
            length: 18e-3,
            eta_target: 0.25,
            pump_offset: 6e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("emitter wavelength", self.lambda_sps),
            ("telecom wavelength", self.lambda_telecom),
            ("height", self.height),
            ("length", self.length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_sps < self.lambda_telecom) {
            return Err(Error::Domain("emitter wavelength must be shorter than the telecom wavelength".into()));
        }
        if !(self.eta_target > 0.0 && self.eta_target <= 1.0) {
            return Err(Error::Domain(format!("eta target must lie in (0, 1], got {}", self.eta_target)));
        }
        if !(self.pump_offset > 0.0) || self.lambda_sps + self.pump_offset >= self.lambda_telecom {
            return Err(Error::Domain(format!("pump offset {} m is not usable", self.pump_offset)));
        }
        Ok(())
    }

    /// (λ_sps + λ_telecom)/2.
    pub fn zdw_target(&self) -> f64 {
        0.5 * (self.lambda_sps + self.lambda_telecom)
    }
}

/// Numerical knobs of the design search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignOptions {
    /// Widths searched, m.
    pub width_range: (f64, f64),
    /// Coarse widths sampled before bisection.
    pub width_scan_points: usize,
    /// Samples per dispersion table.
    pub table_points: usize,
    pub polarization: Polarization,
    pub n2: f64,
    /// Multiplicative power step of the split-step sweep.
    pub power_factor: f64,
    /// Highest power per pump tried, W.
    pub power_cap: f64,
    /// Relative width of the bracketed η crossing at which bisection stops.
    pub power_tolerance: f64,
    pub experiment: ExperimentPolicy,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            width_range: (600e-9, 2000e-9),
            width_scan_points: 57,
            table_points: 400,
            polarization: Polarization::TE,
            n2: DEFAULT_N2,
            power_factor: 1.25,
            power_cap: 50.0,
            power_tolerance: 0.01,
            experiment: ExperimentPolicy::default(),
        }
    }
}

/// Band used for zero-dispersion searches around a target.
/// Band used to describe the reachable range when the target band has no roots.
const SURVEY_BAND: (f64, f64) = (500e-9, 2500e-9);

fn zdw_band(target: f64) -> (f64, f64) {
    (0.6 * target, 1.5 * target)
}

/// Dispersion table over `band`, pulling the long edge in until every
/// sample is guided.
pub fn guided_table(
    db: &MaterialDb,
    geometry: &WaveguideGeometry,
    band: (f64, f64),
    n_points: usize,
    polarization: Polarization,
    n2: f64,
) -> Result<DispersionProfile> {
    let (lo, mut hi) = band;
    for _ in 0..40 {
        match propagation_constant_table(db, geometry, (lo, hi), n_points, polarization, n2) {
            Err(Error::NoGuidedMode { wavelength_nm, .. }) if wavelength_nm * 1e-9 > lo * 1.2 => {
                hi = 0.98 * wavelength_nm * 1e-9;
            }
            other => return other,
        }
    }
    Err(Error::Numerical("could not find a fully guided band".into()))
}

/// Zero-dispersion wavelengths of the strip with this width and height.
pub fn zdw_roots(db: &MaterialDb, width: f64, height: f64, band: (f64, f64), opts: &DesignOptions) -> Result<Vec<f64>> {
    let g = WaveguideGeometry::nitride_strip(width, height);
    let p = guided_table(db, &g, band, opts.table_points, opts.polarization, opts.n2)?;
    Ok(zero_dispersion_wavelength(&p))
}

/// Width placing a zero-dispersion wavelength at `target_zdw`.
///
/// Widths are scanned first; the first adjacent pair across which the
/// lowest root (or, failing that, the second root) crosses the target is
/// bisected until the root is within 1 nm of the target.
pub fn find_width_for_zdw(
    db: &MaterialDb,
    target_zdw: f64,
    height: f64,
    width_range: (f64, f64),
    opts: &DesignOptions,
) -> Result<f64> {
    let (w_lo, w_hi) = (width_range.0.min(width_range.1), width_range.0.max(width_range.1));
    if !(w_lo > 0.0) || !(w_hi > w_lo) || !(target_zdw > 0.0) {
        return Err(Error::Domain("width range and target must be positive and non-empty".into()));
    }
    let band = zdw_band(target_zdw);
    let n = opts.width_scan_points.max(2);
    let widths: Vec<f64> = (0..n).map(|i| w_lo + (w_hi - w_lo) * i as f64 / (n - 1) as f64).collect();
    let roots: Vec<Option<Vec<f64>>> = widths
        .par_iter()
        .map(|&w| zdw_roots(db, w, height, band, opts).ok())
        .collect();

    for order in 0..2 {
        let value = |r: &Option<Vec<f64>>| r.as_ref().and_then(|v| v.get(order).copied());
        for i in 0..n - 1 {
            let (Some(a), Some(b)) = (value(&roots[i]), value(&roots[i + 1])) else {
                continue;
            };
            if (a - target_zdw).signum() == (b - target_zdw).signum() {
                continue;
            }
            let f = |w: f64| match zdw_roots(db, w, height, band, opts) {
                Ok(r) if r.len() > order => r[order] - target_zdw,
                _ => f64::NAN,
            };
            // A root that vanishes mid-bracket sends the search to the next pair.
            if let Ok(w) = bisect_to_target(f, widths[i], widths[i + 1]) {
                return Ok(w);
            }
        }
    }
    let mut all: Vec<f64> = roots.iter().flatten().flatten().copied().collect();
    if all.is_empty() {
        // Nothing near the target; survey a broad band so the error says what is reachable.
        all = widths
            .par_iter()
            .filter_map(|&w| zdw_roots(db, w, height, SURVEY_BAND, opts).ok())
            .flatten()
            .collect();
    }
    let (min_nm, max_nm) = if all.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            all.iter().copied().fold(f64::INFINITY, f64::min) * 1e9,
            all.iter().copied().fold(f64::NEG_INFINITY, f64::max) * 1e9,
        )
    };
    Err(Error::UnreachableTarget {
        target_nm: target_zdw * 1e9,
        min_nm,
        max_nm,
    })
}

/// Bisection that stops once |f| < 1 nm.
fn bisect_to_target<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let tol = 1e-9;
    let mut f_lo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return Err(Error::Numerical(format!("no zero-dispersion wavelength at width {:.2} nm", mid * 1e9)));
        }
        if f_mid.abs() < tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    // Fall back to a plain bracketed root if the 1 nm criterion was never met.
    bisect(f, lo, hi, 1e-12)
}

/// P = arcsin(√η)/(2√(γ₁γ₂)·L): phase-matched equal-power lower bound, W per pump.
pub fn required_pump_power(gamma1: f64, gamma2: f64, length: f64, eta_target: f64) -> Result<f64> {
    if !(eta_target > 0.0 && eta_target <= 1.0) {
        return Err(Error::Domain(format!("eta target must lie in (0, 1], got {eta_target}")));
    }
    if !(gamma1 > 0.0 && gamma2 > 0.0 && length > 0.0) {
        return Err(Error::Domain("gamma values and length must be positive".into()));
    }
    Ok(eta_target.sqrt().asin() / (2.0 * (gamma1 * gamma2).sqrt() * length))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// W per pump.
    pub power: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub schema_version: String,
    pub tool_version: String,
    /// Hash of the inputs that produced the report; filled in by front ends.
    pub config_sha256: String,
    pub target: DesignTarget,
    pub lambda_zdw_target_nm: f64,
    pub width_nm: f64,
    /// Zero-dispersion wavelength matched to the target, nm.
    pub lambda_zdw_nm: f64,
    /// Every zero-dispersion wavelength of the final width, nm.
    pub zdw_roots_nm: Vec<f64>,
    pub lambda_p1_nm: f64,
    pub lambda_p2_nm: f64,
    pub lambda_idler_nm: f64,
    /// ps/(nm·km) at the emitter wavelength.
    pub d_at_sps: f64,
    /// ps/(nm·km) at the short-wavelength pump.
    pub d_at_pump1: f64,
    /// ps/(nm·km) at the telecom pump.
    pub d_at_telecom: f64,
    /// W⁻¹m⁻¹ at pump 1 and pump 2.
    pub gamma_at_each_pump: [f64; 2],
    pub gamma_carrier: f64,
    /// rad/m, plus branch.
    pub kappa_linear: f64,
    pub pump_power_analytic: f64,
    /// First power with η ≥ target in the split-step sweep; `None` below the cap.
    pub pump_power_ssfm: Option<f64>,
    pub eta_at_ssfm_power: Option<f64>,
    pub power_sweep: Vec<SweepPoint>,
    pub warnings: Vec<String>,
}

impl DesignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// λ, W and P_in columns in plain text.
    pub fn text_table(reports: &[DesignReport]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>10} {:>10} {:>10} {:>14} {:>12}",
            "lambda_nm", "width_nm", "zdw_nm", "P_analytic_W", "P_ssfm_W"
        );
        for r in reports {
            let ssfm = r.pump_power_ssfm.map_or_else(|| "n/a".to_string(), |p| format!("{p:.3}"));
            let _ = writeln!(
                s,
                "{:>10.1} {:>10.1} {:>10.1} {:>14.3} {:>12}",
                r.target.lambda_sps * 1e9,
                r.width_nm,
                r.lambda_zdw_nm,
                r.pump_power_analytic,
                ssfm
            );
        }
        s
    }
}

/// Width, dispersion check and pump power for one emitter.
pub fn design_for_sps(db: &MaterialDb, target: &DesignTarget, opts: &DesignOptions) -> Result<DesignReport> {
    target.validate()?;
    let zdw_target = target.zdw_target();
    let width = find_width_for_zdw(db, zdw_target, target.height, opts.width_range, opts)?;
    let mut geometry = WaveguideGeometry::nitride_strip(width, target.height);
    geometry.length = target.length;

    // Band wide enough for the split-step window around both pumps.
    let band = (0.75 * target.lambda_sps, 1.6 * target.lambda_telecom);
    let profile = Arc::new(guided_table(db, &geometry, band, 2 * opts.table_points, opts.polarization, opts.n2)?);
    let roots = zero_dispersion_wavelength(&profile);
    let lambda_zdw = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - zdw_target).abs().total_cmp(&(b - zdw_target).abs()))
        .ok_or_else(|| Error::Numerical("final geometry has no zero-dispersion wavelength".into()))?;

    let lambda_p1 = target.lambda_sps + target.pump_offset;
    let lambda_p2 = target.lambda_telecom;
    let d = |l: f64| profile.d_at(l).map(|d| d.ps_per_nm_km());
    let (d_sps, d_p1, d_p2) = (d(target.lambda_sps)?, d(lambda_p1)?, d(lambda_p2)?);

    let mut warnings = Vec::new();
    for (name, l, dv) in [("pump 1", lambda_p1, d_p1), ("pump 2", lambda_p2, d_p2)] {
        if dv > 0.0 {
            warnings.push(format!(
                "MI risk: {name} at {:.1} nm sees anomalous dispersion (D = {dv:.2} ps/(nm km))",
                l * 1e9
            ));
        } else if dv.abs() < NEAR_ZERO_D {
            warnings.push(format!(
                "{name} at {:.1} nm is only nominally normal (D = {dv:.2} ps/(nm km))",
                l * 1e9
            ));
        }
    }

    let setup = BraggScatteringSetup::from_wavelengths(
        profile.clone(),
        lambda_p1,
        lambda_p2,
        target.lambda_sps,
        1.0,
        1.0,
        target.length,
    )?;
    let (idler, mismatch) = setup.phase_mismatch(Branch::Plus)?;
    let p_analytic = required_pump_power(setup.gamma1, setup.gamma2, target.length, target.eta_target)?;

    let run = |p: f64| -> Result<SweepPoint> {
        let mut s = setup.clone();
        s.p1 = p;
        s.p2 = p;
        s.signal_power = default_signal_power(p, p);
        let r = bs_conversion_experiment(&s, &opts.experiment)?;
        Ok(SweepPoint {
            power: p,
            eta_plus: r.eta_plus,
            eta_minus: r.eta_minus,
        })
    };

    // Coarse multiplicative ladder, evaluated in parallel, then bisection of the first crossing.
    let mut ladder = vec![p_analytic];
    while *ladder.last().unwrap() * opts.power_factor <= opts.power_cap {
        let next = ladder.last().unwrap() * opts.power_factor;
        ladder.push(next);
    }
    let results: Vec<Result<SweepPoint>> = ladder.par_iter().map(|&p| run(p)).collect();
    let mut sweep = Vec::new();
    let mut crossing = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(pt) => {
                sweep.push(pt);
                if pt.eta_plus >= target.eta_target {
                    crossing = Some(i);
                    break;
                }
            }
            Err(e) => {
                warnings.push(format!("split-step sweep stopped at {:.3} W: {e}", ladder[i]));
                break;
            }
        }
    }

    let (mut pump_power_ssfm, mut eta_at) = (None, None);
    match crossing {
        Some(0) => {
            pump_power_ssfm = Some(sweep[0].power);
            eta_at = Some(sweep[0].eta_plus);
        }
        Some(i) => {
            let (mut lo, mut hi) = (sweep[i - 1].power, sweep[i].power);
            let mut best = sweep[i];
            while (hi - lo) > opts.power_tolerance * hi {
                let mid = 0.5 * (lo + hi);
                let pt = run(mid)?;
                sweep.push(pt);
                if pt.eta_plus >= target.eta_target {
                    hi = mid;
                    best = pt;
                } else {
                    lo = mid;
                }
            }
            pump_power_ssfm = Some(best.power);
            eta_at = Some(best.eta_plus);
        }
        None => warnings.push(format!(
            "split-step η stays below {} up to {:.1} W per pump",
            target.eta_target,
            sweep.last().map_or(0.0, |p| p.power)
        )),
    }
    sweep.sort_by(|a, b| a.power.total_cmp(&b.power));

    Ok(DesignReport {
        schema_version: REPORT_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        config_sha256: String::new(),
        target: *target,
        lambda_zdw_target_nm: zdw_target * 1e9,
        width_nm: width * 1e9,
        lambda_zdw_nm: lambda_zdw * 1e9,
        zdw_roots_nm: roots.iter().map(|r| r * 1e9).collect(),
        lambda_p1_nm: lambda_p1 * 1e9,
        lambda_p2_nm: lambda_p2 * 1e9,
        lambda_idler_nm: crate::units::lambda_of(idler) * 1e9,
        d_at_sps: d_sps,
        d_at_pump1: d_p1,
        d_at_telecom: d_p2,
        gamma_at_each_pump: [setup.gamma1, setup.gamma2],
        gamma_carrier: profile.gamma_at(0.5 * (omega_of(lambda_p1) + omega_of(lambda_p2)))?,
        kappa_linear: mismatch.linear,
        pump_power_analytic: p_analytic,
        pump_power_ssfm,
        eta_at_ssfm_power: eta_at,
        power_sweep: sweep,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn analytic_power_examples() {
        let p = required_pump_power(6.0, 6.0, 18e-3, 0.25).unwrap();
        assert!((p - 2.424).abs() < 1e-3, "{p}");
        let full = required_pump_power(6.0, 6.0, 18e-3, 1.0).unwrap();
        assert!((full - (PI / 2.0) / (2.0 * 6.0 * 18e-3)).abs() < 1e-12);
        let tiny = required_pump_power(6.0, 6.0, 18e-3, 1e-12).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-4);
        assert!(required_pump_power(6.0, 6.0, 18e-3, 1.5).is_err());
        assert!(required_pump_power(6.0, 6.0, 18e-3, 0.0).is_err());
    }

    #[test]
    fn presets_parse_and_average() {
        assert_eq!("rb780".parse::<Emitter>().unwrap(), Emitter::Rb780);
        let err = "xx123".parse::<Emitter>().unwrap_err().to_string();
        assert!(err.contains("nv637") && err.contains("qd980"));
        let t = DesignTarget::new(Emitter::Rb780.wavelength());
        assert!((t.zdw_target() - 1165e-9).abs() < 1e-15);
        let mut bad = t;
        bad.lambda_sps = 1600e-9;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn width_search_inverts_the_forward_model() {
        let db = MaterialDb::bundled();
        let opts = DesignOptions::default();
        let target = 1165e-9;
        let roots = zdw_roots(&db, 1200e-9, 550e-9, zdw_band(target), &opts).unwrap();
        let w = find_width_for_zdw(&db, roots[0], 550e-9, opts.width_range, &opts).unwrap();
        assert!((w - 1200e-9).abs() < 5e-9, "{} nm", w * 1e9);
    }

    #[test]
    fn unreachable_zdw_lists_range() {
        let db = MaterialDb::bundled();
        let err = find_width_for_zdw(&db, 3000e-9, 550e-9, (600e-9, 2000e-9), &DesignOptions::default()).unwrap_err();
        match err {
            Error::UnreachableTarget { target_nm, min_nm, max_nm } => {
                assert_eq!(target_nm, 3000.0);
                assert!(min_nm < max_nm && max_nm < 3000.0, "{min_nm} {max_nm}");
            }
            other => panic!("{other:?}"),
        }
    }
}
