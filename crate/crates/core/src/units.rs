//! SI scalar newtypes and the conversions between wavelength, angular
//! frequency and the two dispersion measures.
//!
//! Everything inside the library is SI: meters, seconds, watts, rad/s.
//! Conversions to nm / THz / ps·nm⁻¹·km⁻¹ happen only at the edges.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_positive, Error, Result};

/// Exact defined vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One ps·nm⁻¹·km⁻¹ expressed in s/m².
pub const PS_PER_NM_KM: f64 = 1e-6;

/// Vacuum wavelength in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavelength(f64);

/// Angular frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AngularFrequency(f64);

impl Wavelength {
    pub fn new(meters: f64) -> Result<Self> {
        ensure_positive("wavelength", meters)?;
        Ok(Self(meters))
    }

    pub fn from_nm(nm: f64) -> Result<Self> {
        Self::new(nm * 1e-9)
    }

    pub fn meters(self) -> f64 {
        self.0
    }

    pub fn nm(self) -> f64 {
        self.0 * 1e9
    }

    pub fn to_angular_frequency(self) -> AngularFrequency {
        AngularFrequency(2.0 * PI * SPEED_OF_LIGHT / self.0)
    }
}

impl AngularFrequency {
    pub fn new(rad_per_s: f64) -> Result<Self> {
        ensure_positive("angular frequency", rad_per_s)?;
        Ok(Self(rad_per_s))
    }

    pub fn rad_per_s(self) -> f64 {
        self.0
    }

    pub fn to_wavelength(self) -> Wavelength {
        Wavelength(2.0 * PI * SPEED_OF_LIGHT / self.0)
    }
}

/// ω = 2πc/λ.
pub fn wavelength_to_angular_frequency(lambda: f64) -> Result<f64> {
    Ok(Wavelength::new(lambda)?.to_angular_frequency().rad_per_s())
}

/// λ = 2πc/ω.
pub fn angular_frequency_to_wavelength(omega: f64) -> Result<f64> {
    Ok(AngularFrequency::new(omega)?.to_wavelength().meters())
}

/// Infallible conversion for values already known to be positive.
#[inline]
pub(crate) fn omega_of(lambda: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda
}

#[inline]
pub(crate) fn lambda_of(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

/// Group-velocity dispersion d²β/dω² in s²/m. Positive is normal dispersion.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Beta2(f64);

impl Beta2 {
    pub fn new(s2_per_m: f64) -> Result<Self> {
        if !s2_per_m.is_finite() {
            return Err(Error::Domain(format!("beta2 must be finite, got {s2_per_m}")));
        }
        Ok(Self(s2_per_m))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_normal(self) -> bool {
        self.0 > 0.0
    }
}

/// Dispersion parameter D in s/m².
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DispersionParameterD(f64);

impl DispersionParameterD {
    pub fn from_si(s_per_m2: f64) -> Self {
        Self(s_per_m2)
    }

    pub fn si(self) -> f64 {
        self.0
    }

    pub fn ps_per_nm_km(self) -> f64 {
        self.0 / PS_PER_NM_KM
    }
}

/// D = −(2πc/λ²)·β₂.
pub fn dispersion_parameter(beta2: f64, lambda: f64) -> Result<DispersionParameterD> {
    let beta2 = Beta2::new(beta2)?;
    let lambda = Wavelength::new(lambda)?;
    Ok(d_from_beta2(beta2.value(), lambda.meters()))
}

#[inline]
pub(crate) fn d_from_beta2(beta2: f64, lambda: f64) -> DispersionParameterD {
    DispersionParameterD(-2.0 * PI * SPEED_OF_LIGHT / (lambda * lambda) * beta2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn telecom_and_emitter_frequencies() {
        // 2πc/λ evaluated by hand.
        let w1550 = wavelength_to_angular_frequency(1550e-9).unwrap();
        assert_relative_eq!(w1550, 1.215_259_076e15, max_relative = 1e-9);
        let w980 = wavelength_to_angular_frequency(980e-9).unwrap();
        assert_relative_eq!(w980, 1.922_093_436e15, max_relative = 1e-9);
    }

    #[test]
    fn round_trip_980() {
        let w = wavelength_to_angular_frequency(980e-9).unwrap();
        let l = angular_frequency_to_wavelength(w).unwrap();
        assert_relative_eq!(l, 980e-9, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        for bad in [0.0, -1e-6, f64::NAN, f64::INFINITY] {
            assert!(matches!(wavelength_to_angular_frequency(bad), Err(Error::Domain(_))));
            assert!(matches!(angular_frequency_to_wavelength(bad), Err(Error::Domain(_))));
        }
        assert!(dispersion_parameter(1e-25, 0.0).is_err());
        assert!(dispersion_parameter(f64::NAN, 1e-6).is_err());
    }

    #[test]
    fn dispersion_parameter_values() {
        assert_eq!(dispersion_parameter(0.0, 1550e-9).unwrap().si(), 0.0);
        let d = dispersion_parameter(1e-25, 1550e-9).unwrap().ps_per_nm_km();
        assert!((d - (-78.5)).abs() < 0.2, "D = {d}");
    }

    proptest! {
        #[test]
        fn round_trip_over_band(lambda_nm in 400.0f64..2500.0) {
            let l = lambda_nm * 1e-9;
            let back = angular_frequency_to_wavelength(wavelength_to_angular_frequency(l).unwrap()).unwrap();
            prop_assert!(((back - l) / l).abs() < 1e-12);
        }

        #[test]
        fn d_is_odd_in_beta2(b2 in -1e-24f64..1e-24, lambda_nm in 400.0f64..2500.0) {
            let l = lambda_nm * 1e-9;
            let plus = dispersion_parameter(b2, l).unwrap().si();
            let minus = dispersion_parameter(-b2, l).unwrap().si();
            prop_assert_eq!(plus, -minus);
        }

        #[test]
        fn normal_beta2_gives_negative_d(b2 in 1e-30f64..1e-24, lambda_nm in 400.0f64..2500.0) {
            let d = dispersion_parameter(b2, lambda_nm * 1e-9).unwrap().si();
            prop_assert!(d < 0.0);
        }
    }
}
