use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A table or grid has the wrong size or ordering.
    #[error("shape error: {0}")]
    Shape(String),

    #[error("material file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate material name `{name}` (line {line})")]
    DuplicateMaterial { name: String, line: usize },

    #[error("invalid material `{name}`: {reason}")]
    InvalidMaterial { name: String, reason: String },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("wavelength {wavelength_nm:.3} nm outside validity range [{min_nm}, {max_nm}] nm of `{material}`")]
    OutOfRange {
        material: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("wavelength {wavelength_nm:.3} nm too close to a Sellmeier pole of `{material}`")]
    Pole { material: String, wavelength_nm: f64 },

    #[error("no guided mode at {wavelength_nm:.3} nm: {reason}")]
    NoGuidedMode { wavelength_nm: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("frequency {omega:.6e} rad/s outside tabulated range [{min:.6e}, {max:.6e}] rad/s")]
    OutsideTable { omega: f64, min: f64, max: f64 },

    #[error("tones {first} and {second} snap to the same frequency bin")]
    ToneCollision { first: usize, second: usize },

    #[error("grid would need more than {cap} points; narrow the tone spread or relax the margin")]
    GridTooLarge { cap: usize },

    #[error("nonlinear phase per step {phase:.4} rad exceeds bound {bound} rad; reduce the step size below {suggested_step:.3e} m")]
    NonlinearPhaseBound {
        phase: f64,
        bound: f64,
        suggested_step: f64,
    },

    #[error("spectral overflow: {fraction:.3e} of the power lies outside the dispersion table coverage")]
    SpectralOverflow { fraction: f64 },

    #[error("target zero-dispersion wavelength {target_nm:.1} nm unreachable; achievable range over the searched widths is [{min_nm:.1}, {max_nm:.1}] nm")]
    UnreachableTarget {
        target_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Errors that come from physics or numerics rather than from malformed input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::NoGuidedMode { .. }
                | Error::Numerical(_)
                | Error::OutsideTable { .. }
                | Error::ToneCollision { .. }
                | Error::GridTooLarge { .. }
                | Error::NonlinearPhaseBound { .. }
                | Error::SpectralOverflow { .. }
                | Error::UnreachableTarget { .. }
                | Error::Pole { .. }
                | Error::OutOfRange { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}
