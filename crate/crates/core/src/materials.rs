//! Refractive-index models loaded from a sectioned TOML material file.
//!
//! ```toml
//! [Si3N4]
//! kind = "sellmeier"
//! B = [3.0249, 40314.0]
//! C_um2 = [0.0183170780, 1537208.18]
//! range_nm = [310.0, 5504.0]
//! source = "..."
//!
//! [Air]
//! kind = "constant"
//! n = 1.0
//! range_nm = [200.0, 10000.0]
//! ```
//!
//! Unknown keys are rejected. Material names are case-sensitive and unique.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// The material file shipped with the library.
pub const BUNDLED_MATERIALS: &str = include_str!("../data/materials.toml");

/// Evaluation refuses wavelengths with |λ² − Cᵢ| below this fraction of Cᵢ.
const POLE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum IndexModel {
    Sellmeier { terms: Vec<(f64, f64)> },
    Constant { n: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierModel {
    pub name: String,
    pub model: IndexModel,
    /// Validity range (λ_min, λ_max) in meters.
    pub validity_range: (f64, f64),
    pub source: Option<String>,
}

impl SellmeierModel {
    fn n_squared_unchecked(&self, lambda: f64) -> Result<f64> {
        match &self.model {
            IndexModel::Constant { n } => Ok(n * n),
            IndexModel::Sellmeier { terms } => {
                let l2 = (lambda * 1e6).powi(2);
                let mut n2 = 1.0;
                for &(b, c) in terms {
                    let denom = l2 - c;
                    if denom.abs() < POLE_GUARD * c.abs() {
                        return Err(Error::Pole {
                            material: self.name.clone(),
                            wavelength_nm: lambda * 1e9,
                        });
                    }
                    n2 += b * l2 / denom;
                }
                Ok(n2)
            }
        }
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.validity_range.0 && lambda <= self.validity_range.1
    }

    /// Refractive index at vacuum wavelength `lambda` (meters).
    pub fn index(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() || !self.contains(lambda) {
            return Err(Error::OutOfRange {
                material: self.name.clone(),
                wavelength_nm: lambda * 1e9,
                min_nm: self.validity_range.0 * 1e9,
                max_nm: self.validity_range.1 * 1e9,
            });
        }
        if let IndexModel::Constant { n } = self.model {
            return Ok(n);
        }
        let n2 = self.n_squared_unchecked(lambda)?;
        if !(n2 > 1.0) {
            return Err(Error::Numerical(format!(
                "`{}` gives n² = {n2} at {:.2} nm",
                self.name,
                lambda * 1e9
            )));
        }
        Ok(n2.sqrt())
    }

    fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidMaterial {
            name: self.name.clone(),
            reason,
        };
        let (lo, hi) = self.validity_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0) {
            return Err(invalid("range_nm must be positive and finite".into()));
        }
        if lo >= hi {
            return Err(invalid(format!(
                "range_nm minimum {} nm must be below maximum {} nm",
                lo * 1e9,
                hi * 1e9
            )));
        }
        match &self.model {
            IndexModel::Constant { n } => {
                if !(n.is_finite() && *n >= 1.0) {
                    return Err(invalid(format!("constant index must be ≥ 1, got {n}")));
                }
            }
            IndexModel::Sellmeier { terms } => {
                if terms.is_empty() {
                    return Err(invalid("Sellmeier model needs at least one term".into()));
                }
                for &(b, c) in terms {
                    if !b.is_finite() || !c.is_finite() {
                        return Err(invalid("non-finite Sellmeier coefficient".into()));
                    }
                    if c > 0.0 {
                        let pole = c.sqrt() * 1e-6;
                        if pole >= lo && pole <= hi {
                            return Err(invalid(format!(
                                "pole at {:.1} nm lies inside the validity range",
                                pole * 1e9
                            )));
                        }
                    }
                }
                // n² > 1 across the declared range.
                let samples = 256;
                for k in 0..=samples {
                    let l = lo + (hi - lo) * k as f64 / samples as f64;
                    let n2 = self.n_squared_unchecked(l)?;
                    if !(n2 > 1.0) || !n2.is_finite() {
                        return Err(invalid(format!(
                            "n² = {n2} at {:.1} nm is not above 1",
                            l * 1e9
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    kind: String,
    #[serde(rename = "B")]
    b: Option<Vec<f64>>,
    #[serde(rename = "C_um2")]
    c_um2: Option<Vec<f64>>,
    n: Option<f64>,
    range_nm: Option<[f64; 2]>,
    source: Option<String>,
}

/// Immutable set of named index models.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialDb {
    materials: BTreeMap<String, SellmeierModel>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Section headers with their 1-based line numbers.
fn section_headers(text: &str) -> Vec<(String, usize)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let t = line.trim();
            let inner = t.strip_prefix('[')?.split(']').next()?;
            if t.starts_with("[[") {
                return None;
            }
            Some((inner.trim().trim_matches('"').to_string(), i + 1))
        })
        .collect()
}

impl MaterialDb {
    /// The bundled default data file.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_MATERIALS).expect("bundled material file is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let headers = section_headers(text);
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (name, line) in &headers {
            if seen.insert(name, *line).is_some() {
                return Err(Error::DuplicateMaterial {
                    name: name.clone(),
                    line: *line,
                });
            }
        }
        let line_for = |name: &str| seen.get(name).copied().unwrap_or(1);

        let raw: BTreeMap<String, RawMaterial> = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;

        let mut materials = BTreeMap::new();
        for (name, raw) in raw {
            let line = line_for(&name);
            let missing = |field: &str| Error::Parse {
                line,
                message: format!("material `{name}` is missing field `{field}`"),
            };
            let range = raw.range_nm.ok_or_else(|| missing("range_nm"))?;
            let model = match raw.kind.as_str() {
                "sellmeier" => {
                    let b = raw.b.ok_or_else(|| missing("B"))?;
                    let c = raw.c_um2.ok_or_else(|| missing("C_um2"))?;
                    if raw.n.is_some() {
                        return Err(Error::Parse {
                            line,
                            message: format!("field `n` is not allowed for sellmeier material `{name}`"),
                        });
                    }
                    if b.len() != c.len() {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "material `{name}`: `B` has {} entries but `C_um2` has {}",
                                b.len(),
                                c.len()
                            ),
                        });
                    }
                    IndexModel::Sellmeier {
                        terms: b.into_iter().zip(c).collect(),
                    }
                }
                "constant" => {
                    let n = raw.n.ok_or_else(|| missing("n"))?;
                    if raw.b.is_some() || raw.c_um2.is_some() {
                        return Err(Error::Parse {
                            line,
                            message: format!("fields `B`/`C_um2` are not allowed for constant material `{name}`"),
                        });
                    }
                    IndexModel::Constant { n }
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "material `{name}`: unknown kind `{other}` (expected \"sellmeier\" or \"constant\")"
                        ),
                    })
                }
            };
            let model = SellmeierModel {
                name: name.clone(),
                model,
                validity_range: (range[0] * 1e-9, range[1] * 1e-9),
                source: raw.source,
            };
            model.validate()?;
            materials.insert(name, model);
        }
        Ok(Self { materials })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, name: &str) -> Result<&SellmeierModel> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SellmeierModel> {
        self.materials.values()
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }
}

/// n(λ) for `material` in `db`.
pub fn refractive_index(db: &MaterialDb, material: &str, lambda: f64) -> Result<f64> {
    db.get(material)?.index(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_has_three_materials() {
        let db = MaterialDb::bundled();
        assert_eq!(db.len(), 3);
        assert_eq!(db.names().collect::<Vec<_>>(), ["Air", "Si3N4", "SiO2"]);
    }

    #[test]
    fn published_indices_at_1550() {
        let db = MaterialDb::bundled();
        let silica = refractive_index(&db, "SiO2", 1550e-9).unwrap();
        // Malitson fused silica: 1.44402 at 1550 nm.
        assert!((silica - 1.444).abs() < 5e-4, "n_SiO2 = {silica}");
        let nitride = refractive_index(&db, "Si3N4", 1550e-9).unwrap();
        assert!((nitride - 2.0).abs() < 0.05, "n_Si3N4 = {nitride}");
        for l in [400e-9, 980e-9, 1550e-9, 5000e-9] {
            assert_eq!(refractive_index(&db, "Air", l).unwrap(), 1.0);
        }
    }

    #[test]
    fn normal_material_dispersion() {
        let db = MaterialDb::bundled();
        for name in ["SiO2", "Si3N4"] {
            let mut l = 600e-9;
            while l < 1600e-9 {
                let h = 1e-9;
                let dn = refractive_index(&db, name, l + h).unwrap() - refractive_index(&db, name, l - h).unwrap();
                assert!(dn < 0.0, "{name} dn/dλ ≥ 0 at {} nm", l * 1e9);
                l += 10e-9;
            }
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let text = "[SiO2]\nkind = \"constant\"\nn = 1.45\nrange_nm = [400.0, 2000.0]\n\n[SiO2]\nkind = \"constant\"\nn = 1.46\nrange_nm = [400.0, 2000.0]\n";
        match MaterialDb::parse(text) {
            Err(Error::DuplicateMaterial { name, line }) => {
                assert_eq!(name, "SiO2");
                assert_eq!(line, 6);
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_named() {
        let text = "[X]\nkind = \"sellmeier\"\nB = [1.0]\nrange_nm = [400.0, 2000.0]\n";
        let err = MaterialDb::parse(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
        assert!(err.to_string().contains("C_um2"), "{err}");
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = "[X]\nkind = \"constant\"\nn = 1.5\nrange_nm = [400.0, 2000.0]\ncolour = \"blue\"\n";
        let err = MaterialDb::parse(text).unwrap_err();
        match &err {
            Error::Parse { line, message } => {
                assert_eq!(*line, 5);
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_models_are_rejected() {
        let empty = "[X]\nkind = \"sellmeier\"\nB = []\nC_um2 = []\nrange_nm = [400.0, 2000.0]\n";
        assert!(matches!(MaterialDb::parse(empty), Err(Error::InvalidMaterial { .. })));
        let reversed = "[X]\nkind = \"constant\"\nn = 1.5\nrange_nm = [2000.0, 400.0]\n";
        assert!(matches!(MaterialDb::parse(reversed), Err(Error::InvalidMaterial { .. })));
        // C = 1 um² puts a pole at 1000 nm.
        let pole = "[X]\nkind = \"sellmeier\"\nB = [1.0]\nC_um2 = [1.0]\nrange_nm = [400.0, 2000.0]\n";
        assert!(matches!(MaterialDb::parse(pole), Err(Error::InvalidMaterial { .. })));
    }

    #[test]
    fn evaluation_errors() {
        let db = MaterialDb::bundled();
        assert!(matches!(refractive_index(&db, "GaAs", 1e-6), Err(Error::UnknownMaterial(_))));
        assert!(matches!(refractive_index(&db, "SiO2", 100e-9), Err(Error::OutOfRange { .. })));

        // A model with its pole exactly on the boundary of the range.
        let model = SellmeierModel {
            name: "edge".into(),
            model: IndexModel::Sellmeier { terms: vec![(1.0, 1.0)] },
            validity_range: (500e-9, 1000e-9),
            source: None,
        };
        assert!(matches!(model.index(1000e-9), Err(Error::Pole { .. })));
    }
}
