//! Chip-scale frequency conversion by four-wave-mixing Bragg scattering in
//! silicon nitride waveguides.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`] and [`calculus`]: SI scalar types, dispersion conversions,
//!   finite differences and cubic interpolation.
//! * [`materials`]: Sellmeier index models loaded from a TOML data file.
//! * [`modesolver`]: effective-index mode solver, dispersion tables, zero-dispersion
//!   wavelengths, effective area and the Kerr coefficient γ.
//! * [`cmt`]: the analytic coupled-mode model of Bragg-scattering conversion.
//! * [`ssfm`]: symmetrized split-step Fourier propagation of a single
//!   full-bandwidth envelope.
//! * [`design`]: inverse design of the waveguide width and pump power for a
//!   given emitter wavelength.

pub mod calculus;
pub mod cmt;
pub mod design;
pub mod error;
pub mod export;
pub mod materials;
pub mod modesolver;
pub mod ssfm;
pub mod units;

pub use error::{Error, Result};
