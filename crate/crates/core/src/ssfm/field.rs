use num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::{snap_all, SnappedTone, TimeFrequencyGrid, Tone};
use crate::error::{Error, Result};

/// Complex envelope samples in √W on a periodic time window.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnvelope {
    pub grid: TimeFrequencyGrid,
    pub samples: Vec<Complex64>,
}

impl FieldEnvelope {
    pub fn zeros(grid: TimeFrequencyGrid) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); grid.n_points],
            grid,
        }
    }

    /// Synthesize the time samples from per-bin amplitudes X_k.
    pub fn from_spectrum(grid: TimeFrequencyGrid, spectrum: &[Complex64]) -> Result<Self> {
        if spectrum.len() != grid.n_points {
            return Err(Error::Shape(format!(
                "spectrum has {} bins, grid has {}",
                spectrum.len(),
                grid.n_points
            )));
        }
        let mut samples = spectrum.to_vec();
        FftPlanner::new().plan_fft_forward(grid.n_points).process(&mut samples);
        Ok(Self { grid, samples })
    }

    /// Per-bin amplitudes X_k = (1/N)·Σ a_n·exp(+2πikn/N).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let n = self.grid.n_points;
        let mut x = self.samples.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut x);
        let scale = 1.0 / n as f64;
        x.iter_mut().for_each(|v| *v *= scale);
        x
    }

    /// Power per bin |X_k|², W.
    pub fn spectral_power(&self) -> Vec<f64> {
        self.spectrum().iter().map(|v| v.norm_sqr()).collect()
    }

    /// Mean power Σ|a|²/N, W.
    pub fn total_power(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.grid.n_points as f64
    }

    pub fn peak_power(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }
}

/// Place each tone on its nearest bin with amplitude √P·exp(iφ).
pub fn inject_cw_tones(grid: &TimeFrequencyGrid, tones: &[Tone]) -> Result<(FieldEnvelope, Vec<SnappedTone>)> {
    let snapped = snap_all(grid, tones)?;
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.n_points];
    for (t, s) in tones.iter().zip(&snapped) {
        if !(t.power >= 0.0 && t.power.is_finite()) {
            return Err(Error::Domain(format!("tone power must be non-negative, got {}", t.power)));
        }
        spec[s.bin] = Complex64::from_polar(t.power.sqrt(), t.phase);
    }
    Ok((FieldEnvelope::from_spectrum(*grid, &spec)?, snapped))
}

/// Power in the bins whose frequency lies within ±bandwidth/2 of the centre.
pub fn band_power(field: &FieldEnvelope, omega_center: f64, bandwidth: f64) -> Result<f64> {
    band_power_of(&field.grid, &field.spectral_power(), omega_center, bandwidth)
}

pub(crate) fn band_power_of(grid: &TimeFrequencyGrid, power: &[f64], omega_center: f64, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let (lo, hi) = grid.omega_range();
    if !(omega_center >= lo && omega_center <= hi) {
        return Err(Error::Domain(format!(
            "band centre {omega_center:e} rad/s outside the grid [{lo:e}, {hi:e}]"
        )));
    }
    let half = 0.5 * bandwidth;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, p) in power.iter().enumerate() {
        if (grid.omega_of_bin(k) - omega_center).abs() <= half {
            hits += 1;
            sum += p;
        }
    }
    if hits == 0 {
        return Err(Error::Domain("band contains no frequency bins".into()));
    }
    Ok(sum)
}

/// Super-Gaussian pulse √P·exp(−½(t/T₀)^(2m)) centred in the window, carrying
/// the frequency of bin `offset_bin` (0 keeps it on the carrier).
pub fn super_gaussian_pulse(
    grid: &TimeFrequencyGrid,
    peak_power: f64,
    t0: f64,
    order: u32,
    offset_bin: i64,
) -> Result<FieldEnvelope> {
    if !(peak_power >= 0.0) || !(t0 > 0.0) || order == 0 {
        return Err(Error::Domain("pulse needs P ≥ 0, T₀ > 0 and order ≥ 1".into()));
    }
    let n = grid.n_points;
    let dt = grid.dt();
    let shift = offset_bin as f64 * grid.bin_spacing();
    let amp = peak_power.sqrt();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let x = (t - 0.5 * grid.time_window) / t0;
            let envelope = amp * (-0.5 * x.powi(2 * order as i32)).exp();
            Complex64::from_polar(envelope, -shift * t)
        })
        .collect();
    Ok(FieldEnvelope { grid: *grid, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssfm::grid::build_grid;
    use crate::units::omega_of;

    fn two_tone() -> (TimeFrequencyGrid, Vec<Tone>) {
        let tones = vec![
            Tone {
                omega: omega_of(1550e-9),
                power: 2.0,
                phase: 0.3,
            },
            Tone {
                omega: omega_of(1540e-9),
                power: 0.5,
                phase: -1.1,
            },
        ];
        let (g, _) = build_grid(&tones, 2.0).unwrap();
        (g, tones)
    }

    #[test]
    fn one_watt_tone_carries_one_watt() {
        let (g, _) = build_grid(&[Tone::new(1.2e15, 1.0)], 1.5).unwrap();
        let (f, _) = inject_cw_tones(&g, &[Tone::new(1.2e15, 1.0)]).unwrap();
        assert!((f.total_power() - 1.0).abs() < 1e-12);
        // A single CW line has a flat envelope.
        assert!((f.peak_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_tones_occupy_two_bins_with_phases() {
        let (g, tones) = two_tone();
        let (f, snapped) = inject_cw_tones(&g, &tones).unwrap();
        let spec = f.spectrum();
        let support = spec.iter().filter(|v| v.norm() > 1e-9).count();
        assert_eq!(support, 2);
        let dphi = (spec[snapped[1].bin] / spec[snapped[0].bin]).arg();
        assert!((dphi - (-1.1 - 0.3)).abs() < 1e-12);
        for (t, s) in tones.iter().zip(&snapped) {
            let p = band_power(&f, s.omega, 0.5 * g.bin_spacing()).unwrap();
            assert!((p - t.power).abs() < 1e-9 * t.power);
        }
        assert!((f.total_power() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn band_power_is_complete_and_additive() {
        let (g, tones) = two_tone();
        let (f, snapped) = inject_cw_tones(&g, &tones).unwrap();
        let all = band_power(&f, g.carrier_omega, 2.0 * g.span()).unwrap();
        assert!((all - f.total_power()).abs() < 1e-12);
        let mid = 0.5 * (snapped[0].omega + snapped[1].omega);
        let gap = (snapped[0].omega - snapped[1].omega).abs() - 4.0 * g.bin_spacing();
        assert!(band_power(&f, mid, gap).unwrap() < 1e-20);
        // Split a tone's neighbourhood at a half-bin edge.
        let w = snapped[0].omega;
        let d = g.bin_spacing();
        let left = band_power(&f, w - 2.0 * d, 3.0 * d).unwrap();
        let right = band_power(&f, w + 1.5 * d, 4.0 * d).unwrap();
        assert!((left + right - tones[0].power).abs() < 1e-9);
        assert!(band_power(&f, mid, 0.0).is_err());
    }

    #[test]
    fn colliding_tones_are_rejected() {
        let g = TimeFrequencyGrid::new(1024, 1e-9, 1.2e15).unwrap();
        let d = g.bin_spacing();
        let t = [Tone::new(1.2e15 + 3.0 * d, 1.0), Tone::new(1.2e15 + 3.1 * d, 1.0)];
        assert!(matches!(inject_cw_tones(&g, &t), Err(Error::ToneCollision { first: 0, second: 1 })));
    }

    #[test]
    fn spectrum_round_trips() {
        let (g, tones) = two_tone();
        let (f, _) = inject_cw_tones(&g, &tones).unwrap();
        let back = FieldEnvelope::from_spectrum(g, &f.spectrum()).unwrap();
        for (a, b) in f.samples.iter().zip(&back.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn super_gaussian_peak_and_offset() {
        let g = TimeFrequencyGrid::new(4096, 1e-9, 1.2e15).unwrap();
        let p = super_gaussian_pulse(&g, 4.0, 5e-11, 3, 0).unwrap();
        assert!((p.peak_power() - 4.0).abs() < 1e-9);
        let shifted = super_gaussian_pulse(&g, 4.0, 5e-11, 3, 40).unwrap();
        let power = shifted.spectral_power();
        let k = (0..g.n_points).fold(0, |b, i| if power[i] > power[b] { i } else { b });
        assert_eq!(g.harmonic(k), 40);
        assert!(super_gaussian_pulse(&g, 1.0, 0.0, 1, 0).is_err());
    }
}
