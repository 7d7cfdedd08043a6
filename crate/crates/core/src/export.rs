//! Shared conventions for machine-readable outputs.

use std::io::{self, Write};

/// Version of this library, embedded in every manifest.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Leading comment lines of every CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvHeader {
    pub schema_version: String,
    pub config_sha256: String,
}

impl CsvHeader {
    pub fn new(schema_version: impl Into<String>, config_sha256: impl Into<String>) -> Self {
        Self {
            schema_version: schema_version.into(),
            config_sha256: config_sha256.into(),
        }
    }

    /// Writes the comment lines followed by the column header.
    pub fn write<W: Write>(&self, out: &mut W, columns: &str) -> io::Result<()> {
        writeln!(out, "# schema_version={}", self.schema_version)?;
        writeln!(out, "# config_sha256={}", self.config_sha256)?;
        writeln!(out, "{columns}")
    }
}

/// Shortest round-trip decimal, switching to exponent form for very large or small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e9).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.5, -2.25e-30, 6.02e23, 1234.5678, 1e-4, f64::NEG_INFINITY] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(2.6e-5), "2.6e-5");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }
}
