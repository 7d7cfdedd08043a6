//! Symmetrized split-step Fourier propagation of one full-bandwidth envelope.
//!
//! The optical field is A(z,t)·exp(i(β₀z − ω_c t)) with a single envelope A
//! spanning every pump, signal and idler. A spectral component at
//! ω = ω_c + Ω therefore varies as exp(−iΩt) in A. Spectra use
//! X_k = (1/N)·Σ a_n·exp(+2πikn/N), which puts Ω = k·δω on bin k and makes
//! |X_k|² the power carried by that bin.

mod experiment;
mod field;
mod grid;
mod propagate;

pub use experiment::{
    bs_conversion_experiment, ConversionExperiment, ExperimentPolicy, RunManifest, MANIFEST_SCHEMA, SPECTRUM_SCHEMA,
};
pub use field::{band_power, inject_cw_tones, super_gaussian_pulse, FieldEnvelope};
pub use grid::{build_grid, build_grid_with, GridPolicy, SnappedTone, TimeFrequencyGrid, Tone, MAX_POINTS, MIN_POINTS};
pub use propagate::{propagate, PropagationSpec, RunLog, NONLINEAR_PHASE_BOUND, OVERFLOW_LIMIT};
