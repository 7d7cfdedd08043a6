use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::field::FieldEnvelope;
use crate::error::{Error, Result};
use crate::modesolver::DispersionProfile;

/// Largest Kerr phase any sample may pick up in one step, rad.
pub const NONLINEAR_PHASE_BOUND: f64 = 0.05;
/// Largest fraction of power allowed in bins the dispersion table does not cover.
pub const OVERFLOW_LIMIT: f64 = 0.01;

/// Waveguide and integrator settings for one propagation.
#[derive(Debug, Clone)]
pub struct PropagationSpec {
    pub profile: Arc<DispersionProfile>,
    /// γ at the grid carrier, W⁻¹m⁻¹; applied to the whole band.
    pub gamma_carrier: f64,
    /// m
    pub length: f64,
    /// Requested step, m; shortened so an integer number of steps fits.
    pub step: f64,
    pub loss_db_per_m: f64,
}

impl PropagationSpec {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v > 0.0 && v.is_finite();
        if !finite_pos(self.length) {
            return Err(Error::Domain(format!("length must be positive, got {}", self.length)));
        }
        if !finite_pos(self.step) || self.step > self.length * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "step must lie in (0, length = {}], got {}",
                self.length, self.step
            )));
        }
        if !(self.gamma_carrier >= 0.0 && self.gamma_carrier.is_finite()) {
            return Err(Error::Domain(format!("gamma must be non-negative, got {}", self.gamma_carrier)));
        }
        if !(self.loss_db_per_m >= 0.0 && self.loss_db_per_m.is_finite()) {
            return Err(Error::Domain(format!("loss must be non-negative, got {}", self.loss_db_per_m)));
        }
        Ok(())
    }

    /// Number of uniform steps actually taken.
    pub fn n_steps(&self) -> usize {
        let ratio = self.length / self.step;
        let nearest = ratio.round();
        if (ratio - nearest).abs() < 1e-9 * ratio {
            (nearest as usize).max(1)
        } else {
            (ratio.ceil() as usize).max(1)
        }
    }
}

/// What happened during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub steps: usize,
    /// m
    pub step_size: f64,
    /// rad
    pub max_nonlinear_phase: f64,
    /// W
    pub input_power: f64,
    /// W
    pub output_power: f64,
    /// |P_out − P_in·exp(−αL)| / P_in; zero input gives zero.
    pub conservation_error: f64,
    /// Fraction of output power outside the dispersion table.
    pub outside_fraction: f64,
}

/// Strang splitting: half dispersion, full Kerr, half dispersion, with
/// adjacent half steps fused into one full step between Kerr kicks.
pub fn propagate(field: &FieldEnvelope, spec: &PropagationSpec) -> Result<(FieldEnvelope, RunLog)> {
    spec.validate()?;
    let grid = field.grid;
    let n = grid.n_points;
    if field.samples.len() != n {
        return Err(Error::Shape(format!("field has {} samples, grid has {n}", field.samples.len())));
    }
    let profile = &spec.profile;
    let wc = grid.carrier_omega;
    let beta0 = profile.beta_at(wc)?;
    let beta1 = profile.beta1_at(wc)?;
    let steps = spec.n_steps();
    let h = spec.length / steps as f64;
    let gamma = spec.gamma_carrier;

    let input_power = field.total_power();
    let peak = field.peak_power();
    let first_phase = gamma * peak * h;
    if first_phase > NONLINEAR_PHASE_BOUND {
        return Err(phase_error(first_phase, gamma, peak));
    }

    let outside: Vec<bool> = (0..n).map(|k| !profile.covers(grid.omega_of_bin(k))).collect();
    let initial_outside = outside_fraction(&field.spectral_power(), &outside);
    if initial_outside > OVERFLOW_LIMIT {
        return Err(Error::SpectralOverflow { fraction: initial_outside });
    }

    // Power attenuation α in 1/m; each full step multiplies amplitudes by exp(−αh/2).
    let alpha = spec.loss_db_per_m * std::f64::consts::LN_10 / 10.0;
    let inv_n = 1.0 / n as f64;
    let mut half = Vec::with_capacity(n);
    let mut full = Vec::with_capacity(n);
    for k in 0..n {
        let offset = grid.harmonic(k) as f64 * grid.bin_spacing();
        let phase = (profile.beta_extrapolated(wc + offset) - beta0 - beta1 * offset) * h;
        half.push(Complex64::from_polar((-0.25 * alpha * h).exp() * inv_n, 0.5 * phase));
        full.push(Complex64::from_polar((-0.5 * alpha * h).exp() * inv_n, phase));
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    let mut a = field.samples.clone();
    let mut disperse = |a: &mut [Complex64], factors: &[Complex64]| {
        inv.process_with_scratch(a, &mut scratch);
        a.iter_mut().zip(factors).for_each(|(v, f)| *v *= f);
        fwd.process_with_scratch(a, &mut scratch);
    };

    let mut max_phase = 0.0f64;
    disperse(&mut a, &half);
    for s in 0..steps {
        let mut step_peak = 0.0f64;
        if gamma > 0.0 {
            for v in a.iter_mut() {
                let p = v.norm_sqr();
                step_peak = step_peak.max(p);
                *v *= Complex64::from_polar(1.0, gamma * p * h);
            }
        }
        let phase = gamma * step_peak * h;
        if phase > NONLINEAR_PHASE_BOUND {
            return Err(phase_error(phase, gamma, step_peak));
        }
        max_phase = max_phase.max(phase);
        disperse(&mut a, if s + 1 == steps { &half } else { &full });
    }

    let out = FieldEnvelope { grid, samples: a };
    let output_power = out.total_power();
    let frac = outside_fraction(&out.spectral_power(), &outside);
    if frac > OVERFLOW_LIMIT {
        return Err(Error::SpectralOverflow { fraction: frac });
    }
    let expected = input_power * (-alpha * spec.length).exp();
    let conservation_error = if input_power > 0.0 {
        (output_power - expected).abs() / input_power
    } else {
        0.0
    };
    Ok((
        out,
        RunLog {
            steps,
            step_size: h,
            max_nonlinear_phase: max_phase,
            input_power,
            output_power,
            conservation_error,
            outside_fraction: frac,
        },
    ))
}

fn phase_error(phase: f64, gamma: f64, peak: f64) -> Error {
    Error::NonlinearPhaseBound {
        phase,
        bound: NONLINEAR_PHASE_BOUND,
        suggested_step: 0.8 * NONLINEAR_PHASE_BOUND / (gamma * peak),
    }
}

fn outside_fraction(power: &[f64], outside: &[bool]) -> f64 {
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let out: f64 = power.iter().zip(outside).filter(|(_, &o)| o).map(|(p, _)| p).sum();
    // An empty float sum is -0.0.
    (out + 0.0) / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmt::mi_gain;
    use crate::ssfm::field::{band_power, inject_cw_tones};
    use crate::ssfm::grid::{build_grid, Tone};
    use crate::units::{omega_of, SPEED_OF_LIGHT};

    fn quadratic(b2: f64, w0: f64, lo_nm: f64, hi_nm: f64) -> Arc<DispersionProfile> {
        Arc::new(
            DispersionProfile::from_fn(
                omega_of(hi_nm * 1e-9),
                omega_of(lo_nm * 1e-9),
                512,
                |w| 1.8 * w / SPEED_OF_LIGHT + 0.5 * b2 * (w - w0).powi(2),
                1.0,
            )
            .unwrap(),
        )
    }

    fn spec(profile: Arc<DispersionProfile>, gamma: f64, length: f64, step: f64) -> PropagationSpec {
        PropagationSpec {
            profile,
            gamma_carrier: gamma,
            length,
            step,
            loss_db_per_m: 0.0,
        }
    }

    fn three_tones() -> Vec<Tone> {
        vec![
            Tone::new(omega_of(1545e-9), 0.5),
            Tone::new(omega_of(1555e-9), 0.3),
            Tone::new(omega_of(1530e-9), 1e-3),
        ]
    }

    #[test]
    fn linear_propagation_keeps_spectral_magnitudes() {
        let p = quadratic(2e-25, omega_of(1550e-9), 1400.0, 1700.0);
        let tones = three_tones();
        let (g, _) = build_grid(&tones, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let (out, log) = propagate(&f, &spec(p, 0.0, 0.05, 1e-3)).unwrap();
        for (a, b) in f.spectrum().iter().zip(out.spectrum()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        assert_eq!(log.steps, 50);
        assert_eq!(log.max_nonlinear_phase, 0.0);
    }

    #[test]
    fn single_tone_acquires_self_phase() {
        // Constant group index: β₂ = 0 everywhere.
        let p = quadratic(0.0, 1.2e15, 1400.0, 1700.0);
        let w = omega_of(1550e-9);
        let tone = [Tone::new(w, 0.7)];
        let (g, s) = build_grid(&tone, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tone).unwrap();
        let (gamma, z) = (3.0, 0.02);
        let (out, _) = propagate(&f, &spec(p, gamma, z, 1e-3)).unwrap();
        let x0 = f.spectrum()[s[0].bin];
        let x1 = out.spectrum()[s[0].bin];
        let dphi = (x1 / x0).arg();
        assert!((dphi - gamma * 0.7 * z).abs() < 1e-6, "{dphi}");
    }

    #[test]
    fn lossless_runs_conserve_power() {
        let p = quadratic(2e-25, omega_of(1550e-9), 1400.0, 1700.0);
        let tones = three_tones();
        let (g, _) = build_grid(&tones, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let (_, log) = propagate(&f, &spec(p, 5.0, 0.05, 2e-4)).unwrap();
        assert!(log.conservation_error < 1e-6, "{log:?}");
        assert!(log.max_nonlinear_phase <= NONLINEAR_PHASE_BOUND);
    }

    #[test]
    fn loss_attenuates_exactly() {
        let p = quadratic(2e-25, omega_of(1550e-9), 1400.0, 1700.0);
        let tones = three_tones();
        let (g, _) = build_grid(&tones, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let mut sp = spec(p, 5.0, 0.05, 2e-4);
        sp.loss_db_per_m = 20.0;
        let (_, log) = propagate(&f, &sp).unwrap();
        let expected = f.total_power() * 10f64.powf(-20.0 * 0.05 / 10.0);
        assert!((log.output_power - expected).abs() < 1e-9 * expected);
        assert!(log.conservation_error < 1e-6);
    }

    #[test]
    fn oversized_step_is_refused() {
        let p = quadratic(2e-25, omega_of(1550e-9), 1400.0, 1700.0);
        let tones = three_tones();
        let (g, _) = build_grid(&tones, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let err = propagate(&f, &spec(p.clone(), 50.0, 0.05, 0.01)).unwrap_err();
        match err {
            Error::NonlinearPhaseBound { suggested_step, .. } => {
                assert!(propagate(&f, &spec(p, 50.0, 0.05, suggested_step)).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_longer_than_device_is_invalid() {
        let p = quadratic(2e-25, omega_of(1550e-9), 1400.0, 1700.0);
        let tone = [Tone::new(omega_of(1550e-9), 1.0)];
        let (g, _) = build_grid(&tone, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tone).unwrap();
        assert!(matches!(propagate(&f, &spec(p, 1.0, 0.01, 0.02)), Err(Error::Domain(_))));
    }

    #[test]
    fn narrow_table_triggers_overflow() {
        // Tones at 1545/1555 nm but a table covering only 1549–1551 nm.
        let p = quadratic(2e-25, omega_of(1550e-9), 1549.0, 1551.0);
        let tones = [Tone::new(omega_of(1549.5e-9), 1.0), Tone::new(omega_of(1555e-9), 1.0), Tone::new(omega_of(1545e-9), 1.0)];
        let (g, _) = build_grid(&tones, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        assert!(matches!(propagate(&f, &spec(p, 1.0, 0.01, 1e-3)), Err(Error::SpectralOverflow { .. })));
    }

    #[test]
    fn halving_the_step_barely_moves_the_result() {
        let p = quadratic(2e-25, omega_of(1550e-9), 1400.0, 1700.0);
        let tones = three_tones();
        let (g, s) = build_grid(&tones, 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let idler = s[2].omega + s[1].omega - s[0].omega;
        let run = |h: f64| {
            let (out, _) = propagate(&f, &spec(p.clone(), 5.0, 0.05, h)).unwrap();
            band_power(&out, idler, 0.5 * g.bin_spacing()).unwrap()
        };
        let (a, b) = (run(5e-4), run(2.5e-4));
        assert!(((a - b) / b).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn anomalous_pump_grows_seeded_sidebands_at_mi_rate() {
        let b2 = -1e-25;
        let (gamma, power) = (6.0, 1.0);
        let wp = omega_of(1550e-9);
        let profile = quadratic(b2, wp, 1300.0, 1900.0);
        let detuning = (2.0 * gamma * power / b2.abs()).sqrt();
        let tones = [
            Tone::new(wp, power),
            Tone::new(wp + detuning, 1e-10),
            Tone::new(wp - detuning, 1e-10),
        ];
        let (g, s) = build_grid(&tones, 4.0).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let sideband = |field: &FieldEnvelope| band_power(field, s[1].omega, 0.5 * g.bin_spacing()).unwrap();
        let sp = spec(profile, gamma, 0.5, 1e-3);
        let (mid, _) = propagate(&f, &sp).unwrap();
        let (end, _) = propagate(&mid, &sp).unwrap();
        let rate = (sideband(&end) / sideband(&mid)).ln() / (2.0 * 0.5);
        let snapped = s[1].omega - s[0].omega;
        let expected = mi_gain(b2, gamma, power, snapped);
        assert!(((rate - expected) / expected).abs() < 0.1, "rate {rate} vs {expected}");
    }

    #[test]
    fn normal_pump_does_not_amplify_sidebands() {
        let b2 = 1e-25;
        let wp = omega_of(1550e-9);
        let profile = quadratic(b2, wp, 1300.0, 1900.0);
        let detuning = (2.0 * 6.0 / b2).sqrt();
        let tones = [Tone::new(wp, 1.0), Tone::new(wp + detuning, 1e-10), Tone::new(wp - detuning, 1e-10)];
        let (g, s) = build_grid(&tones, 4.0).unwrap();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let (out, _) = propagate(&f, &spec(profile, 6.0, 1.0, 1e-3)).unwrap();
        let ratio = band_power(&out, s[1].omega, 0.5 * g.bin_spacing()).unwrap() / 1e-10;
        // Bounded parametric exchange only; the anomalous case grows by e¹².
        assert!(ratio < 5.0, "sideband grew by {ratio}");
    }
}
