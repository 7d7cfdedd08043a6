//! Fundamental mode of an asymmetric three-layer dielectric slab.

use serde::{Deserialize, Serialize};

use crate::calculus::bisect;
use crate::error::{Error, Result};

/// Scan points used to bracket the dispersion-equation root before bisection.
const SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Polarization {
    #[default]
    TE,
    TM,
}

/// Layer stack: substrate (x < 0) | film (0 ≤ x ≤ thickness) | cover (x > thickness).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub n_film: f64,
    pub n_cover: f64,
    pub n_substrate: f64,
    pub thickness: f64,
}

/// Solved fundamental mode with the parameters of its cos/exp field shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabMode {
    pub n_eff: f64,
    /// Transverse wavenumber inside the film, 1/m.
    pub kappa: f64,
    /// Field decay constant into the substrate, 1/m.
    pub decay_substrate: f64,
    /// Field decay constant into the cover, 1/m.
    pub decay_cover: f64,
    /// Phase of the film cosine at the substrate interface.
    pub phase: f64,
    pub thickness: f64,
}

struct Wavenumbers {
    kappa: f64,
    decay_s: f64,
    decay_c: f64,
    /// Decay constants weighted by the polarization boundary factor.
    weighted_s: f64,
    weighted_c: f64,
}

impl Slab {
    fn wavenumbers(&self, n_eff: f64, k0: f64, pol: Polarization) -> Wavenumbers {
        let n2 = n_eff * n_eff;
        let kappa = k0 * (self.n_film * self.n_film - n2).max(0.0).sqrt();
        let decay_s = k0 * (n2 - self.n_substrate * self.n_substrate).max(0.0).sqrt();
        let decay_c = k0 * (n2 - self.n_cover * self.n_cover).max(0.0).sqrt();
        let (ws, wc) = match pol {
            Polarization::TE => (1.0, 1.0),
            Polarization::TM => (
                (self.n_film / self.n_substrate).powi(2),
                (self.n_film / self.n_cover).powi(2),
            ),
        };
        Wavenumbers {
            kappa,
            decay_s,
            decay_c,
            weighted_s: ws * decay_s,
            weighted_c: wc * decay_c,
        }
    }

    /// κd − atan(p_s/κ) − atan(p_c/κ); zero at the fundamental mode and
    /// strictly decreasing in n_eff.
    fn dispersion_residual(&self, n_eff: f64, k0: f64, pol: Polarization) -> f64 {
        let w = self.wavenumbers(n_eff, k0, pol);
        if w.kappa == 0.0 {
            return -std::f64::consts::PI;
        }
        w.kappa * self.thickness - (w.weighted_s / w.kappa).atan() - (w.weighted_c / w.kappa).atan()
    }

    pub fn solve(&self, lambda: f64, pol: Polarization) -> Result<SlabMode> {
        for (name, v) in [
            ("film index", self.n_film),
            ("cover index", self.n_cover),
            ("substrate index", self.n_substrate),
            ("thickness", self.thickness),
            ("wavelength", lambda),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("slab {name} must be positive, got {v}")));
            }
        }
        let n_low = self.n_cover.max(self.n_substrate);
        if self.n_film <= n_low {
            return Err(Error::NoGuidedMode {
                wavelength_nm: lambda * 1e9,
                reason: format!(
                    "film index {:.5} does not exceed cladding index {:.5}",
                    self.n_film, n_low
                ),
            });
        }
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let f = |n: f64| self.dispersion_residual(n, k0, pol);

        // Sign-change scan from the cladding line up to the film index.
        let span = self.n_film - n_low;
        let mut bracket = None;
        let mut prev_n = n_low;
        let mut prev_f = f(prev_n);
        for i in 1..=SCAN_POINTS {
            let n = n_low + span * i as f64 / SCAN_POINTS as f64;
            let fv = f(n);
            if prev_f > 0.0 && fv <= 0.0 {
                bracket = Some((prev_n, n));
                break;
            }
            prev_n = n;
            prev_f = fv;
        }
        let (lo, hi) = bracket.ok_or_else(|| Error::NoGuidedMode {
            wavelength_nm: lambda * 1e9,
            reason: format!(
                "slab of thickness {:.1} nm is below cutoff",
                self.thickness * 1e9
            ),
        })?;
        let n_eff = bisect(f, lo, hi, 1e-15)?;
        if !(n_eff > n_low && n_eff < self.n_film) {
            return Err(Error::Numerical(format!(
                "slab root {n_eff} escaped the guidance interval"
            )));
        }
        let w = self.wavenumbers(n_eff, k0, pol);
        Ok(SlabMode {
            n_eff,
            kappa: w.kappa,
            decay_substrate: w.decay_s,
            decay_cover: w.decay_c,
            phase: (w.weighted_s / w.kappa).atan(),
            thickness: self.thickness,
        })
    }
}

/// Effective index of the fundamental slab mode.
pub fn slab_effective_index(
    n_film: f64,
    n_cover: f64,
    n_substrate: f64,
    thickness: f64,
    lambda: f64,
    polarization: Polarization,
) -> Result<f64> {
    Slab {
        n_film,
        n_cover,
        n_substrate,
        thickness,
    }
    .solve(lambda, polarization)
    .map(|m| m.n_eff)
}

impl SlabMode {
    /// Field amplitude at transverse position `x` (substrate interface at 0).
    pub fn field(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.phase.cos() * (self.decay_substrate * x).exp()
        } else if x <= self.thickness {
            (self.kappa * x - self.phase).cos()
        } else {
            (self.kappa * self.thickness - self.phase).cos()
                * (-self.decay_cover * (x - self.thickness)).exp()
        }
    }

    /// (∫E² dx, ∫E⁴ dx) in closed form over the whole line.
    pub fn field_moments(&self) -> (f64, f64) {
        let k = self.kappa;
        let u0 = -self.phase;
        let u1 = k * self.thickness - self.phase;
        let sq = |u: f64| u / 2.0 + (2.0 * u).sin() / 4.0;
        let quad = |u: f64| 3.0 * u / 8.0 + (2.0 * u).sin() / 4.0 + (4.0 * u).sin() / 32.0;
        let c0 = u0.cos();
        let c1 = u1.cos();
        let ps = self.decay_substrate;
        let pc = self.decay_cover;
        let m2 = c0.powi(2) / (2.0 * ps) + (sq(u1) - sq(u0)) / k + c1.powi(2) / (2.0 * pc);
        let m4 = c0.powi(4) / (4.0 * ps) + (quad(u1) - quad(u0)) / k + c1.powi(4) / (4.0 * pc);
        (m2, m4)
    }

    /// (∫E²)² / ∫E⁴, the one-dimensional effective width in meters.
    pub fn effective_width(&self) -> f64 {
        let (m2, m4) = self.field_moments();
        m2 * m2 / m4
    }
}
