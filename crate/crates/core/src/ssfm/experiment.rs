use std::io::Write;

use serde::{Deserialize, Serialize};

use super::field::{band_power_of, inject_cw_tones, FieldEnvelope};
use super::grid::{build_grid_with, GridPolicy, SnappedTone, TimeFrequencyGrid, Tone};
use super::propagate::{propagate, PropagationSpec, RunLog};
use crate::cmt::BraggScatteringSetup;
use crate::error::{Error, Result};
use crate::export::{fmt_f64, CsvHeader, TOOL_VERSION};
use crate::modesolver::{Polarization, WaveguideGeometry};
use crate::units::lambda_of;

pub const SPECTRUM_SCHEMA: &str = "spectrum/1";
pub const MANIFEST_SCHEMA: &str = "run_manifest/1";

/// Numerical settings of a split-step conversion run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPolicy {
    pub grid: GridPolicy,
    /// Target Kerr phase per step used to pick the step, rad.
    pub phase_per_step: f64,
    /// Lower bound on the number of steps.
    pub min_steps: usize,
    pub loss_db_per_m: f64,
    /// Replaces γ read from the table at the carrier.
    pub gamma_override: Option<f64>,
}

impl Default for ExperimentPolicy {
    fn default() -> Self {
        Self {
            grid: GridPolicy::default(),
            phase_per_step: 0.01,
            min_steps: 200,
            loss_db_per_m: 0.0,
            gamma_override: None,
        }
    }
}

/// Outcome of one split-step conversion run.
#[derive(Debug, Clone)]
pub struct ConversionExperiment {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub idler_plus_omega: f64,
    pub idler_minus_omega: f64,
    /// Injected signal power, W.
    pub signal_power: f64,
    pub gamma_carrier: f64,
    pub grid: TimeFrequencyGrid,
    /// Pump 1, pump 2, signal, in that order.
    pub tones: Vec<SnappedTone>,
    pub log: RunLog,
    pub output: FieldEnvelope,
}

impl ConversionExperiment {
    pub fn conserved_power_error(&self) -> f64 {
        self.log.conservation_error
    }

    /// Snapped pump 1, pump 2 and signal frequencies.
    pub fn snapped_omegas(&self) -> (f64, f64, f64) {
        (self.tones[0].omega, self.tones[1].omega, self.tones[2].omega)
    }

    /// Every bin, sorted by wavelength: lambda_nm, power_w, power_dbm.
    pub fn write_spectrum_csv<W: Write>(&self, mut out: W, header: &CsvHeader) -> std::io::Result<()> {
        header.write(&mut out, "lambda_nm,power_w,power_dbm")?;
        let power = self.output.spectral_power();
        let mut rows: Vec<(f64, f64)> = power
            .iter()
            .enumerate()
            .map(|(k, &p)| (self.grid.omega_of_bin(k), p))
            .collect();
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (w, p) in rows {
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(lambda_of(w) * 1e9),
                fmt_f64(p),
                fmt_f64(10.0 * (p / 1e-3).log10())
            )?;
        }
        Ok(())
    }

    /// Everything needed to repeat the run.
    pub fn manifest(&self, setup: &BraggScatteringSetup, policy: &ExperimentPolicy, config_sha256: &str) -> RunManifest {
        let profile = &setup.profile;
        let (lmin, lmax) = profile.wavelength_range();
        RunManifest {
            schema_version: MANIFEST_SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            config_sha256: config_sha256.into(),
            setup: SetupRecord {
                lambda_p1_nm: lambda_of(setup.omega_p1) * 1e9,
                lambda_p2_nm: lambda_of(setup.omega_p2) * 1e9,
                lambda_s_nm: lambda_of(setup.omega_s) * 1e9,
                p1_w: setup.p1,
                p2_w: setup.p2,
                signal_power_w: setup.signal_power,
                gamma1: setup.gamma1,
                gamma2: setup.gamma2,
                length_m: setup.length,
            },
            profile: ProfileRecord {
                geometry: profile.geometry.clone(),
                polarization: profile.polarization,
                lambda_min_nm: lmin * 1e9,
                lambda_max_nm: lmax * 1e9,
                n_points: profile.omega.len(),
            },
            policy: *policy,
            grid: GridRecord {
                n_points: self.grid.n_points,
                time_window_s: self.grid.time_window,
                carrier_omega: self.grid.carrier_omega,
                bin_spacing: self.grid.bin_spacing(),
            },
            tones: self.tones.clone(),
            gamma_carrier: self.gamma_carrier,
            log: self.log,
            eta_plus: self.eta_plus,
            eta_minus: self.eta_minus,
            idler_plus_nm: lambda_of(self.idler_plus_omega) * 1e9,
            idler_minus_nm: lambda_of(self.idler_minus_omega) * 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupRecord {
    pub lambda_p1_nm: f64,
    pub lambda_p2_nm: f64,
    pub lambda_s_nm: f64,
    pub p1_w: f64,
    pub p2_w: f64,
    pub signal_power_w: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub geometry: Option<WaveguideGeometry>,
    pub polarization: Polarization,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub n_points: usize,
    pub time_window_s: f64,
    pub carrier_omega: f64,
    pub bin_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub setup: SetupRecord,
    pub profile: ProfileRecord,
    pub policy: ExperimentPolicy,
    pub grid: GridRecord,
    pub tones: Vec<SnappedTone>,
    pub gamma_carrier: f64,
    pub log: RunLog,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub idler_plus_nm: f64,
    pub idler_minus_nm: f64,
}

/// Inject both pumps and the weak signal, propagate the full device and
/// measure both idler bins against the injected signal power.
pub fn bs_conversion_experiment(setup: &BraggScatteringSetup, policy: &ExperimentPolicy) -> Result<ConversionExperiment> {
    setup.validate()?;
    if !(setup.length > 0.0) {
        return Err(Error::Domain("split-step runs need a positive length".into()));
    }
    if !(setup.signal_power > 0.0) {
        return Err(Error::Domain("signal power must be positive to measure conversion".into()));
    }
    if !(policy.phase_per_step > 0.0 && policy.phase_per_step <= super::NONLINEAR_PHASE_BOUND) {
        return Err(Error::Domain(format!(
            "phase per step must lie in (0, {}], got {}",
            super::NONLINEAR_PHASE_BOUND,
            policy.phase_per_step
        )));
    }
    let tones = [
        Tone::new(setup.omega_p1, setup.p1),
        Tone::new(setup.omega_p2, setup.p2),
        Tone::new(setup.omega_s, setup.signal_power),
    ];
    let (grid, _) = build_grid_with(&tones, &policy.grid)?;
    let (field, snapped) = inject_cw_tones(&grid, &tones)?;
    let gamma = match policy.gamma_override {
        Some(g) => g,
        None => setup.profile.gamma_at(grid.carrier_omega)?,
    };

    // CW lines beat to a peak of (Σ√P)².
    let peak: f64 = tones.iter().map(|t| t.power.sqrt()).sum::<f64>().powi(2);
    let mut step = setup.length / policy.min_steps.max(1) as f64;
    if gamma * peak > 0.0 {
        step = step.min(policy.phase_per_step / (gamma * peak));
    }
    let spec = PropagationSpec {
        profile: setup.profile.clone(),
        gamma_carrier: gamma,
        length: setup.length,
        step,
        loss_db_per_m: policy.loss_db_per_m,
    };
    let (output, log) = propagate(&field, &spec)?;

    let (w1, w2, ws) = (snapped[0].omega, snapped[1].omega, snapped[2].omega);
    let idler_plus = w2 + (ws - w1);
    let idler_minus = w2 - (ws - w1);
    let power = output.spectral_power();
    let bin = 0.5 * grid.bin_spacing();
    let signal_in = setup.signal_power;
    let measure = |w: f64| -> Result<f64> {
        if grid.nearest_bin(w).is_none() {
            return Err(Error::Domain(format!("idler at {:.3} nm lies outside the grid", lambda_of(w) * 1e9)));
        }
        Ok(band_power_of(&grid, &power, w, bin)? / signal_in)
    };
    Ok(ConversionExperiment {
        eta_plus: measure(idler_plus)?,
        eta_minus: measure(idler_minus)?,
        idler_plus_omega: idler_plus,
        idler_minus_omega: idler_minus,
        signal_power: signal_in,
        gamma_carrier: gamma,
        grid,
        tones: snapped,
        log,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmt::{conversion_efficiency, Branch};
    use crate::modesolver::DispersionProfile;
    use crate::units::{omega_of, SPEED_OF_LIGHT};
    use std::sync::Arc;

    fn profile() -> Arc<DispersionProfile> {
        // Normal dispersion everywhere, γ flat at 2 W⁻¹m⁻¹.
        let w0 = omega_of(1200e-9);
        Arc::new(
            DispersionProfile::from_fn(
                omega_of(2400e-9),
                omega_of(700e-9),
                800,
                |w| 1.8 * w / SPEED_OF_LIGHT + 0.5 * 5e-27 * (w - w0).powi(2) + 1e-42 * (w - w0).powi(3),
                2.0,
            )
            .unwrap(),
        )
    }

    fn setup(p: f64) -> BraggScatteringSetup {
        BraggScatteringSetup::from_wavelengths(profile(), 974e-9, 1550e-9, 979e-9, p, p, 18e-3).unwrap()
    }

    #[test]
    fn zero_pumps_leave_the_signal_alone() {
        let mut s = setup(0.0);
        s.signal_power = 1e-6;
        let r = bs_conversion_experiment(&s, &ExperimentPolicy::default()).unwrap();
        assert!(r.eta_plus < 1e-25 && r.eta_minus < 1e-25);
        let signal = band_power_of(&r.grid, &r.output.spectral_power(), r.tones[2].omega, r.grid.bin_spacing()).unwrap();
        assert!((signal - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn low_power_run_matches_coupled_mode_theory() {
        let s = setup(0.2);
        let r = bs_conversion_experiment(&s, &ExperimentPolicy::default()).unwrap();
        let (w1, w2, ws) = r.snapped_omegas();
        let mut oracle = s.clone();
        (oracle.omega_p1, oracle.omega_p2, oracle.omega_s) = (w1, w2, ws);
        oracle.gamma1 = r.gamma_carrier;
        oracle.gamma2 = r.gamma_carrier;
        let cmt = conversion_efficiency(&oracle, Branch::Plus, s.length).unwrap().eta;
        let db = 10.0 * (r.eta_plus / cmt).log10();
        assert!(db.abs() < 1.0, "ssfm {} vs cmt {} ({db} dB)", r.eta_plus, cmt);
        assert!(r.conserved_power_error() < 1e-6);
    }

    #[test]
    fn idler_scales_with_signal() {
        let s = setup(0.5);
        let mut twice = s.clone();
        twice.signal_power *= 2.0;
        let a = bs_conversion_experiment(&s, &ExperimentPolicy::default()).unwrap();
        let b = bs_conversion_experiment(&twice, &ExperimentPolicy::default()).unwrap();
        let pa = a.eta_plus * a.signal_power;
        let pb = b.eta_plus * b.signal_power;
        assert!((pb / pa - 2.0).abs() < 0.02, "{}", pb / pa);
        let ma = a.eta_minus * a.signal_power;
        let mb = b.eta_minus * b.signal_power;
        assert!((mb / ma - 2.0).abs() < 0.02, "{}", mb / ma);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let s = setup(0.3);
        let a = bs_conversion_experiment(&s, &ExperimentPolicy::default()).unwrap();
        let b = bs_conversion_experiment(&s, &ExperimentPolicy::default()).unwrap();
        assert_eq!(a.output.samples, b.output.samples);
        assert_eq!(a.eta_plus.to_bits(), b.eta_plus.to_bits());
    }

    #[test]
    fn spectrum_csv_is_sorted_by_wavelength() {
        let r = bs_conversion_experiment(&setup(0.1), &ExperimentPolicy::default()).unwrap();
        let mut buf = Vec::new();
        r.write_spectrum_csv(&mut buf, &CsvHeader::new(SPECTRUM_SCHEMA, "x")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lambdas: Vec<f64> = text
            .lines()
            .skip(3)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(lambdas.len(), r.grid.n_points);
        assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
        let manifest = r.manifest(&setup(0.1), &ExperimentPolicy::default(), "x");
        let json = serde_json::to_string(&manifest).unwrap();
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, manifest);
    }
}
