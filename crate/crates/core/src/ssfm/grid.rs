use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest transform size used for any run.
pub const MIN_POINTS: usize = 1 << 10;
/// Largest transform size before the setup is rejected.
pub const MAX_POINTS: usize = 1 << 22;

/// A continuous-wave input line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// rad/s
    pub omega: f64,
    /// W
    pub power: f64,
    /// rad
    pub phase: f64,
}

impl Tone {
    pub fn new(omega: f64, power: f64) -> Self {
        Self {
            omega,
            power,
            phase: 0.0,
        }
    }
}

/// Periodic time window of `n_points` samples around `carrier_omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFrequencyGrid {
    pub n_points: usize,
    /// s
    pub time_window: f64,
    /// rad/s
    pub carrier_omega: f64,
}

impl TimeFrequencyGrid {
    pub fn new(n_points: usize, time_window: f64, carrier_omega: f64) -> Result<Self> {
        if !n_points.is_power_of_two() || n_points < MIN_POINTS || n_points > MAX_POINTS {
            return Err(Error::Domain(format!(
                "grid size must be a power of two in [{MIN_POINTS}, {MAX_POINTS}], got {n_points}"
            )));
        }
        if !(time_window > 0.0 && time_window.is_finite()) || !(carrier_omega > 0.0) {
            return Err(Error::Domain("time window and carrier must be positive".into()));
        }
        Ok(Self {
            n_points,
            time_window,
            carrier_omega,
        })
    }

    /// Angular-frequency bin spacing 2π/T, rad/s.
    pub fn bin_spacing(&self) -> f64 {
        2.0 * PI / self.time_window
    }

    /// Total angular-frequency span N·δω, rad/s.
    pub fn span(&self) -> f64 {
        self.n_points as f64 * self.bin_spacing()
    }

    pub fn dt(&self) -> f64 {
        self.time_window / self.n_points as f64
    }

    /// Signed harmonic number of FFT bin `k`.
    pub fn harmonic(&self, k: usize) -> i64 {
        let n = self.n_points;
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Absolute angular frequency of FFT bin `k`.
    pub fn omega_of_bin(&self, k: usize) -> f64 {
        self.carrier_omega + self.harmonic(k) as f64 * self.bin_spacing()
    }

    /// Nearest FFT bin to `omega`, or `None` outside the window.
    pub fn nearest_bin(&self, omega: f64) -> Option<usize> {
        let h = ((omega - self.carrier_omega) / self.bin_spacing()).round();
        let half = (self.n_points / 2) as f64;
        if !(h >= -half && h < half) {
            return None;
        }
        let h = h as i64;
        Some(if h >= 0 { h as usize } else { (h + self.n_points as i64) as usize })
    }

    /// Frequency range covered by the bins, inclusive.
    pub fn omega_range(&self) -> (f64, f64) {
        let n = self.n_points;
        (self.omega_of_bin(n / 2), self.omega_of_bin(n / 2 - 1))
    }
}

/// How a grid is sized around a set of tones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    /// Required span as a multiple of the tone spread, ≥ 1.
    pub margin_factor: f64,
    /// Largest allowed bin spacing, rad/s.
    pub max_bin_spacing: f64,
    /// Largest allowed relative snap error per tone.
    pub snap_tolerance: f64,
    pub max_points: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            margin_factor: 1.5,
            max_bin_spacing: 2.0 * PI * 50e9,
            snap_tolerance: 1e-6,
            max_points: MAX_POINTS,
        }
    }
}

/// Where a requested tone landed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnappedTone {
    pub requested_omega: f64,
    pub omega: f64,
    pub bin: usize,
    pub relative_error: f64,
}

/// Grid sized with the default policy and the given span margin.
pub fn build_grid(tones: &[Tone], margin_factor: f64) -> Result<(TimeFrequencyGrid, Vec<SnappedTone>)> {
    build_grid_with(
        tones,
        &GridPolicy {
            margin_factor,
            ..GridPolicy::default()
        },
    )
}

/// Smallest power-of-two grid whose span covers `margin_factor` times the
/// tone spread, whose bin spacing respects the cap, and on which every tone
/// lands within the snap tolerance on its own bin.
///
/// The carrier sits midway between the extreme tones and the spacing is
/// (spread/2)/M, so the extremes are exact; M is searched upward until the
/// interior tones snap too.
pub fn build_grid_with(tones: &[Tone], policy: &GridPolicy) -> Result<(TimeFrequencyGrid, Vec<SnappedTone>)> {
    if tones.is_empty() {
        return Err(Error::Domain("grid needs at least one tone".into()));
    }
    if !(policy.margin_factor >= 1.0) {
        return Err(Error::Domain(format!(
            "margin factor must be at least 1, got {}",
            policy.margin_factor
        )));
    }
    if !(policy.max_bin_spacing > 0.0) || !(policy.snap_tolerance > 0.0) {
        return Err(Error::Domain("bin-spacing cap and snap tolerance must be positive".into()));
    }
    for (i, t) in tones.iter().enumerate() {
        if !(t.omega > 0.0 && t.omega.is_finite()) || !(t.power >= 0.0 && t.power.is_finite()) {
            return Err(Error::Domain(format!("tone {i} needs positive frequency and non-negative power")));
        }
        if let Some(j) = tones[..i].iter().position(|u| u.omega == t.omega) {
            return Err(Error::ToneCollision { first: j, second: i });
        }
    }
    let cap = policy.max_points.min(MAX_POINTS);
    let lo = tones.iter().map(|t| t.omega).fold(f64::INFINITY, f64::min);
    let hi = tones.iter().map(|t| t.omega).fold(f64::NEG_INFINITY, f64::max);

    if tones.len() == 1 {
        let grid = TimeFrequencyGrid::new(MIN_POINTS, 2.0 * PI / policy.max_bin_spacing, lo)?;
        return Ok((grid, snap_all(&grid, tones)?));
    }

    let carrier = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let m_min = ((half / policy.max_bin_spacing).ceil() as usize).max(1);
    let mut n = MIN_POINTS;
    while n <= cap {
        let m_max = ((n as f64 / (2.0 * policy.margin_factor)).floor() as usize).min(n / 2 - 1);
        for m in m_min..=m_max {
            let d_omega = half / m as f64;
            if fits(tones, carrier, d_omega, policy.snap_tolerance) {
                let grid = TimeFrequencyGrid::new(n, 2.0 * PI / d_omega, carrier)?;
                return Ok((grid, snap_all(&grid, tones)?));
            }
        }
        n *= 2;
    }
    Err(Error::GridTooLarge { cap })
}

fn fits(tones: &[Tone], carrier: f64, d_omega: f64, tol: f64) -> bool {
    let mut used: Vec<i64> = Vec::with_capacity(tones.len());
    for t in tones {
        let pos = (t.omega - carrier) / d_omega;
        let k = pos.round();
        if (pos - k).abs() * d_omega > tol * t.omega {
            return false;
        }
        let k = k as i64;
        if used.contains(&k) {
            return false;
        }
        used.push(k);
    }
    true
}

pub(crate) fn snap_all(grid: &TimeFrequencyGrid, tones: &[Tone]) -> Result<Vec<SnappedTone>> {
    let mut out: Vec<SnappedTone> = Vec::with_capacity(tones.len());
    for (i, t) in tones.iter().enumerate() {
        let bin = grid.nearest_bin(t.omega).ok_or_else(|| {
            Error::Domain(format!("tone {i} at {:e} rad/s lies outside the grid", t.omega))
        })?;
        if let Some(j) = out.iter().position(|s| s.bin == bin) {
            return Err(Error::ToneCollision { first: j, second: i });
        }
        let omega = grid.omega_of_bin(bin);
        out.push(SnappedTone {
            requested_omega: t.omega,
            omega,
            bin,
            relative_error: (omega - t.omega).abs() / t.omega,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::omega_of;

    #[test]
    fn single_tone_sits_on_the_carrier() {
        let w = omega_of(1550e-9);
        let (g, s) = build_grid(&[Tone::new(w, 1.0)], 1.5).unwrap();
        assert_eq!(g.carrier_omega, w);
        assert_eq!(g.n_points, MIN_POINTS);
        assert_eq!(s[0].bin, 0);
        assert_eq!(s[0].relative_error, 0.0);
    }

    #[test]
    fn paper_tones_fit_with_margin() {
        let tones = [
            Tone::new(omega_of(974e-9), 1.0),
            Tone::new(omega_of(1550e-9), 1.0),
            Tone::new(omega_of(980e-9), 1e-6),
        ];
        let (g, snapped) = build_grid(&tones, 1.5).unwrap();
        let spread = tones[0].omega - tones[1].omega;
        assert!(g.span() >= 1.5 * spread);
        assert!(g.bin_spacing() <= GridPolicy::default().max_bin_spacing * (1.0 + 1e-12));
        assert!(g.n_points.is_power_of_two() && g.n_points >= MIN_POINTS);
        for s in &snapped {
            assert!(s.relative_error < 1e-6, "{s:?}");
        }
        // Minimality: the next smaller size cannot host the same tones.
        if g.n_points > MIN_POINTS {
            let smaller = GridPolicy {
                max_points: g.n_points / 2,
                ..GridPolicy::default()
            };
            assert!(matches!(build_grid_with(&tones, &smaller), Err(Error::GridTooLarge { .. })));
        }
        // 980 nm to 1550 nm is about 112 THz.
        let df = (omega_of(980e-9) - omega_of(1550e-9)) / (2.0 * PI);
        assert!((df / 1e12 - 112.4).abs() < 0.5, "{df}");
    }

    #[test]
    fn rejects_bad_margins_and_duplicates() {
        let t = [Tone::new(1e15, 1.0), Tone::new(1.2e15, 1.0)];
        assert!(matches!(build_grid(&t, 0.9), Err(Error::Domain(_))));
        assert!(matches!(build_grid(&[], 1.5), Err(Error::Domain(_))));
        let dup = [Tone::new(1e15, 1.0), Tone::new(1e15, 2.0)];
        assert!(matches!(build_grid(&dup, 1.5), Err(Error::ToneCollision { first: 0, second: 1 })));
    }

    #[test]
    fn impossible_span_reports_cap() {
        let policy = GridPolicy {
            max_bin_spacing: 2.0 * PI * 1e6,
            ..GridPolicy::default()
        };
        let t = [Tone::new(omega_of(700e-9), 1.0), Tone::new(omega_of(1600e-9), 1.0)];
        assert!(matches!(build_grid_with(&t, &policy), Err(Error::GridTooLarge { cap: MAX_POINTS })));
    }

    #[test]
    fn bins_map_back_to_frequencies() {
        let g = TimeFrequencyGrid::new(1024, 1e-10, 1.2e15).unwrap();
        for k in [0usize, 1, 511, 512, 1023] {
            assert_eq!(g.nearest_bin(g.omega_of_bin(k)), Some(k));
        }
        let (lo, hi) = g.omega_range();
        assert!(lo < g.carrier_omega && g.carrier_omega < hi);
        assert_eq!(g.nearest_bin(hi + 10.0 * g.bin_spacing()), None);
    }
}
