//! Run configuration: a sectioned TOML file in which every dimensioned value
//! carries its unit, e.g. `width = "1200 nm"` or `pump1_power = "13 mW"`.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use fwmbs::cmt::Branch;
use fwmbs::modesolver::{Polarization, WaveguideGeometry, DEFAULT_N2};

use crate::CliError;

/// A value as written in the file; numbers without units are rejected
/// when the field is dimensioned.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RawQuantity {
    Text(String),
    Number(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Power,
    /// m²/W
    KerrIndex,
    /// W⁻¹m⁻¹
    Nonlinearity,
    /// dB per length
    Loss,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)],
            Dimension::Power => &[("uW", 1e-6), ("µW", 1e-6), ("mW", 1e-3), ("W", 1.0)],
            Dimension::KerrIndex => &[("m2/W", 1.0), ("m^2/W", 1.0), ("cm2/W", 1e-4), ("cm^2/W", 1e-4)],
            Dimension::Nonlinearity => &[("/W/m", 1.0), ("1/W/m", 1.0), ("/W/km", 1e-3)],
            Dimension::Loss => &[("dB/m", 1.0), ("dB/cm", 100.0), ("dB/km", 1e-3)],
        }
    }

    fn expected(self) -> String {
        self.units().iter().map(|u| u.0).collect::<Vec<_>>().join(", ")
    }
}

/// Parse "<number> <unit>" into SI.
pub fn parse_quantity(field: &str, raw: &RawQuantity, dim: Dimension) -> Result<f64, CliError> {
    let text = match raw {
        RawQuantity::Number(v) => {
            return Err(CliError::Config(format!(
                "{field}: value {v} has no unit (expected one of {})",
                dim.expected()
            )))
        }
        RawQuantity::Text(t) => t.trim(),
    };
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(CliError::Config(format!(
            "{field}: '{text}' has no unit (expected one of {})",
            dim.expected()
        )));
    }
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{field}: cannot read a number from '{text}'")))?;
    let scale = dim
        .units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, s)| *s)
        .ok_or_else(|| CliError::Config(format!("{field}: unknown unit '{unit}' (expected one of {})", dim.expected())))?;
    if !value.is_finite() {
        return Err(CliError::Config(format!("{field}: value must be finite")));
    }
    Ok(value * scale)
}

fn required<'a>(field: &str, v: &'a Option<RawQuantity>) -> Result<&'a RawQuantity, CliError> {
    v.as_ref().ok_or_else(|| CliError::Config(format!("{field}: missing")))
}

fn quantity_or(field: &str, v: &Option<RawQuantity>, dim: Dimension, default: f64) -> Result<f64, CliError> {
    v.as_ref().map_or(Ok(default), |r| parse_quantity(field, r, dim))
}

fn quantity(field: &str, v: &Option<RawQuantity>, dim: Dimension) -> Result<f64, CliError> {
    parse_quantity(field, required(field, v)?, dim)
}

fn optional(field: &str, v: &Option<RawQuantity>, dim: Dimension) -> Result<Option<f64>, CliError> {
    v.as_ref().map(|r| parse_quantity(field, r, dim)).transpose()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub waveguide: Option<WaveguideSection>,
    pub dispersion: Option<DispersionSection>,
    pub conversion: Option<ConversionSection>,
    pub analytic: Option<AnalyticSection>,
    pub propagate: Option<PropagateSection>,
    pub design: Option<DesignSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideSection {
    pub width: Option<RawQuantity>,
    pub height: Option<RawQuantity>,
    pub length: Option<RawQuantity>,
    pub core: Option<String>,
    pub top_clad: Option<String>,
    pub substrate: Option<String>,
    pub polarization: Option<Polarization>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    pub lambda_min: Option<RawQuantity>,
    pub lambda_max: Option<RawQuantity>,
    pub points: Option<usize>,
    pub n2: Option<RawQuantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionSection {
    pub pump1: Option<RawQuantity>,
    pub pump2: Option<RawQuantity>,
    pub signal: Option<RawQuantity>,
    pub pump1_power: Option<RawQuantity>,
    pub pump2_power: Option<RawQuantity>,
    pub signal_power: Option<RawQuantity>,
    pub gamma1: Option<RawQuantity>,
    pub gamma2: Option<RawQuantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    pub signal_min: Option<RawQuantity>,
    pub signal_max: Option<RawQuantity>,
    pub points: Option<usize>,
    pub branch: Option<BranchChoice>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateSection {
    pub loss: Option<RawQuantity>,
    pub margin: Option<f64>,
    pub min_steps: Option<usize>,
    pub phase_per_step: Option<f64>,
    pub gamma: Option<RawQuantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub emitter: Option<String>,
    pub wavelength: Option<RawQuantity>,
    pub telecom: Option<RawQuantity>,
    pub height: Option<RawQuantity>,
    pub length: Option<RawQuantity>,
    pub pump_offset: Option<RawQuantity>,
    pub eta_target: Option<f64>,
    pub power_cap: Option<RawQuantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<SweepAxis>,
    pub start: Option<RawQuantity>,
    pub stop: Option<RawQuantity>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BranchChoice {
    Plus,
    Minus,
    Both,
}

impl BranchChoice {
    pub fn branches(self) -> Vec<Branch> {
        match self {
            BranchChoice::Plus => vec![Branch::Plus],
            BranchChoice::Minus => vec![Branch::Minus],
            BranchChoice::Both => Branch::BOTH.to_vec(),
        }
    }
}

/// Swept parameter: equal pump power, signal wavelength or core width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Power,
    Signal,
    Width,
}

impl SweepAxis {
    pub fn dimension(self) -> Dimension {
        match self {
            SweepAxis::Power => Dimension::Power,
            SweepAxis::Signal | SweepAxis::Width => Dimension::Length,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::Signal => "signal",
            SweepAxis::Width => "width",
        }
    }

    /// Column heading and scale from SI to the reported unit.
    pub fn column(self) -> (&'static str, f64) {
        match self {
            SweepAxis::Power => ("pump_power_w", 1.0),
            SweepAxis::Signal => ("lambda_s_nm", 1e9),
            SweepAxis::Width => ("width_nm", 1e9),
        }
    }
}

/// Config text plus its hash, kept so every output can point back at it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            config,
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveguide {
    pub geometry: WaveguideGeometry,
    pub polarization: Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSettings {
    pub band: Option<(f64, f64)>,
    pub points: usize,
    pub n2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub lambda_p1: f64,
    pub lambda_p2: f64,
    pub lambda_s: f64,
    pub p1: f64,
    pub p2: f64,
    pub signal_power: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSweep {
    pub signal_range: (f64, f64),
    pub points: usize,
    pub branch: BranchChoice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateSettings {
    pub loss_db_per_m: f64,
    pub margin: f64,
    pub min_steps: usize,
    pub phase_per_step: f64,
    pub gamma: Option<f64>,
}

impl RunConfig {
    pub fn waveguide(&self) -> Result<Waveguide, CliError> {
        let s = self
            .waveguide
            .as_ref()
            .ok_or_else(|| CliError::Config("[waveguide]: section missing".into()))?;
        let mut g = WaveguideGeometry::nitride_strip(
            quantity("waveguide.width", &s.width, Dimension::Length)?,
            quantity("waveguide.height", &s.height, Dimension::Length)?,
        );
        g.length = quantity("waveguide.length", &s.length, Dimension::Length)?;
        if let Some(c) = &s.core {
            g.core = c.clone();
        }
        if let Some(c) = &s.top_clad {
            g.top_clad = c.clone();
        }
        if let Some(c) = &s.substrate {
            g.substrate = c.clone();
        }
        for (name, v) in [("waveguide.width", g.width), ("waveguide.height", g.height)] {
            if !(v > 0.0) {
                return Err(CliError::Config(format!("{name}: must be positive")));
            }
        }
        if !(g.length >= 0.0) {
            return Err(CliError::Config("waveguide.length: must not be negative".into()));
        }
        Ok(Waveguide {
            geometry: g,
            polarization: s.polarization.unwrap_or(Polarization::TE),
        })
    }

    pub fn dispersion(&self) -> Result<DispersionSettings, CliError> {
        let Some(s) = &self.dispersion else {
            return Ok(DispersionSettings {
                band: None,
                points: 400,
                n2: DEFAULT_N2,
            });
        };
        let band = match (&s.lambda_min, &s.lambda_max) {
            (None, None) => None,
            _ => {
                let lo = quantity("dispersion.lambda_min", &s.lambda_min, Dimension::Length)?;
                let hi = quantity("dispersion.lambda_max", &s.lambda_max, Dimension::Length)?;
                if !(lo > 0.0 && hi > lo) {
                    return Err(CliError::Config("dispersion: need 0 < lambda_min < lambda_max".into()));
                }
                Some((lo, hi))
            }
        };
        let points = s.points.unwrap_or(400);
        if points < fwmbs::modesolver::MIN_TABLE_POINTS {
            return Err(CliError::Config(format!(
                "dispersion.points: at least {} required",
                fwmbs::modesolver::MIN_TABLE_POINTS
            )));
        }
        let n2 = quantity_or("dispersion.n2", &s.n2, Dimension::KerrIndex, DEFAULT_N2)?;
        if !(n2 > 0.0) {
            return Err(CliError::Config("dispersion.n2: must be positive".into()));
        }
        Ok(DispersionSettings { band, points, n2 })
    }

    pub fn conversion(&self) -> Result<Conversion, CliError> {
        let s = self
            .conversion
            .as_ref()
            .ok_or_else(|| CliError::Config("[conversion]: section missing".into()))?;
        let c = Conversion {
            lambda_p1: quantity("conversion.pump1", &s.pump1, Dimension::Length)?,
            lambda_p2: quantity("conversion.pump2", &s.pump2, Dimension::Length)?,
            lambda_s: quantity("conversion.signal", &s.signal, Dimension::Length)?,
            p1: quantity("conversion.pump1_power", &s.pump1_power, Dimension::Power)?,
            p2: quantity("conversion.pump2_power", &s.pump2_power, Dimension::Power)?,
            signal_power: optional("conversion.signal_power", &s.signal_power, Dimension::Power)?,
            gamma1: optional("conversion.gamma1", &s.gamma1, Dimension::Nonlinearity)?,
            gamma2: optional("conversion.gamma2", &s.gamma2, Dimension::Nonlinearity)?,
        };
        for (name, v) in [
            ("conversion.pump1", c.lambda_p1),
            ("conversion.pump2", c.lambda_p2),
            ("conversion.signal", c.lambda_s),
        ] {
            if !(v > 0.0) {
                return Err(CliError::Config(format!("{name}: must be positive")));
            }
        }
        for (name, v) in [
            ("conversion.pump1_power", Some(c.p1)),
            ("conversion.pump2_power", Some(c.p2)),
            ("conversion.signal_power", c.signal_power),
            ("conversion.gamma1", c.gamma1),
            ("conversion.gamma2", c.gamma2),
        ] {
            if v.is_some_and(|v| v < 0.0) {
                return Err(CliError::Config(format!("{name}: must not be negative")));
            }
        }
        Ok(c)
    }

    pub fn analytic(&self, conversion: &Conversion) -> Result<AnalyticSweep, CliError> {
        let Some(s) = &self.analytic else {
            return Ok(AnalyticSweep {
                signal_range: (conversion.lambda_s, conversion.lambda_s),
                points: 1,
                branch: BranchChoice::Both,
            });
        };
        let lo = quantity_or("analytic.signal_min", &s.signal_min, Dimension::Length, conversion.lambda_s)?;
        let hi = quantity_or("analytic.signal_max", &s.signal_max, Dimension::Length, conversion.lambda_s)?;
        let points = s.points.unwrap_or(if lo == hi { 1 } else { 201 });
        if points == 0 {
            return Err(CliError::Config("analytic.points: at least 1 required".into()));
        }
        if !(lo > 0.0 && hi > 0.0) {
            return Err(CliError::Config("analytic: signal range must be positive".into()));
        }
        Ok(AnalyticSweep {
            signal_range: (lo, hi),
            points,
            branch: s.branch.unwrap_or(BranchChoice::Both),
        })
    }

    pub fn propagate(&self) -> Result<PropagateSettings, CliError> {
        let d = PropagateSettings {
            loss_db_per_m: 0.0,
            margin: 1.5,
            min_steps: 200,
            phase_per_step: 0.01,
            gamma: None,
        };
        let Some(s) = &self.propagate else {
            return Ok(d);
        };
        let p = PropagateSettings {
            loss_db_per_m: quantity_or("propagate.loss", &s.loss, Dimension::Loss, 0.0)?,
            margin: s.margin.unwrap_or(d.margin),
            min_steps: s.min_steps.unwrap_or(d.min_steps),
            phase_per_step: s.phase_per_step.unwrap_or(d.phase_per_step),
            gamma: optional("propagate.gamma", &s.gamma, Dimension::Nonlinearity)?,
        };
        if !(p.loss_db_per_m >= 0.0) {
            return Err(CliError::Config("propagate.loss: must not be negative".into()));
        }
        if !(p.margin >= 1.0) {
            return Err(CliError::Config("propagate.margin: must be at least 1".into()));
        }
        if p.min_steps == 0 {
            return Err(CliError::Config("propagate.min_steps: must be at least 1".into()));
        }
        if !(p.phase_per_step > 0.0 && p.phase_per_step <= fwmbs::ssfm::NONLINEAR_PHASE_BOUND) {
            return Err(CliError::Config(format!(
                "propagate.phase_per_step: must lie in (0, {}]",
                fwmbs::ssfm::NONLINEAR_PHASE_BOUND
            )));
        }
        Ok(p)
    }
}

/// Resolved design section; absent fields fall back to the library defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInputs {
    pub emitter: Option<String>,
    pub wavelength: Option<f64>,
    pub telecom: Option<f64>,
    pub height: Option<f64>,
    pub length: Option<f64>,
    pub pump_offset: Option<f64>,
    pub eta_target: Option<f64>,
    pub power_cap: Option<f64>,
}

impl RunConfig {
    pub fn design(&self) -> Result<DesignInputs, CliError> {
        let Some(s) = &self.design else {
            return Ok(DesignInputs {
                emitter: None,
                wavelength: None,
                telecom: None,
                height: None,
                length: None,
                pump_offset: None,
                eta_target: None,
                power_cap: None,
            });
        };
        Ok(DesignInputs {
            emitter: s.emitter.clone(),
            wavelength: optional("design.wavelength", &s.wavelength, Dimension::Length)?,
            telecom: optional("design.telecom", &s.telecom, Dimension::Length)?,
            height: optional("design.height", &s.height, Dimension::Length)?,
            length: optional("design.length", &s.length, Dimension::Length)?,
            pump_offset: optional("design.pump_offset", &s.pump_offset, Dimension::Length)?,
            eta_target: s.eta_target,
            power_cap: optional("design.power_cap", &s.power_cap, Dimension::Power)?,
        })
    }
}
