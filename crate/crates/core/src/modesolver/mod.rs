//! Effective-index mode solver for rectangular strip waveguides.
//!
//! The vertical stack (substrate | core | top cladding) is solved as a slab
//! first; its effective index then becomes the film index of a lateral slab
//! of the waveguide width flanked on both sides by the top cladding. Both
//! stages use the dispersion equation of the requested polarization.

mod area;
mod profile;
mod slab;

pub use area::{effective_area, effective_area_sampled, nonlinear_coefficient, EffectiveArea};
pub use profile::{propagation_constant_table, zero_dispersion_wavelength, DispersionProfile, MIN_TABLE_POINTS};
pub use slab::{slab_effective_index, Polarization, Slab, SlabMode};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::materials::MaterialDb;

/// Nonlinear refractive index of Si₃N₄ used when none is configured, m²/W.
pub const DEFAULT_N2: f64 = 2.5e-19;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    /// Core width, m.
    pub width: f64,
    /// Core height (film thickness), m.
    pub height: f64,
    pub core: String,
    pub top_clad: String,
    pub substrate: String,
    /// Device length, m.
    pub length: f64,
}

impl WaveguideGeometry {
    /// 550 nm × 1200 nm Si₃N₄ strip on SiO₂ with air above, 18 mm long.
    pub fn nitride_strip(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            core: "Si3N4".into(),
            top_clad: "Air".into(),
            substrate: "SiO2".into(),
            length: 18e-3,
        }
    }

    pub fn validate(&self, db: &MaterialDb) -> Result<()> {
        ensure_positive("waveguide width", self.width)?;
        ensure_positive("waveguide height", self.height)?;
        ensure_positive("waveguide length", self.length)?;
        for m in [&self.core, &self.top_clad, &self.substrate] {
            db.get(m)?;
        }
        Ok(())
    }
}

impl Default for WaveguideGeometry {
    fn default() -> Self {
        Self::nitride_strip(1200e-9, 550e-9)
    }
}

/// Both slab solutions behind one effective index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EimMode {
    pub n_eff: f64,
    pub vertical: SlabMode,
    pub lateral: SlabMode,
}

pub(crate) fn solve_eim(
    db: &MaterialDb,
    geometry: &WaveguideGeometry,
    lambda: f64,
    polarization: Polarization,
) -> Result<EimMode> {
    geometry.validate(db)?;
    let n_core = db.get(&geometry.core)?.index(lambda)?;
    let n_top = db.get(&geometry.top_clad)?.index(lambda)?;
    let n_sub = db.get(&geometry.substrate)?.index(lambda)?;

    let vertical = Slab {
        n_film: n_core,
        n_cover: n_top,
        n_substrate: n_sub,
        thickness: geometry.height,
    }
    .solve(lambda, polarization)?;
    let lateral = Slab {
        n_film: vertical.n_eff,
        n_cover: n_top,
        n_substrate: n_top,
        thickness: geometry.width,
    }
    .solve(lambda, polarization)?;

    let n_eff = lateral.n_eff;
    let n_clad = n_top.max(n_sub);
    if !(n_eff > n_clad) {
        return Err(Error::NoGuidedMode {
            wavelength_nm: lambda * 1e9,
            reason: format!("n_eff {n_eff:.5} does not exceed cladding index {n_clad:.5}"),
        });
    }
    if !(n_eff < n_core) {
        return Err(Error::Numerical(format!(
            "n_eff {n_eff} not below core index {n_core}"
        )));
    }
    Ok(EimMode {
        n_eff,
        vertical,
        lateral,
    })
}

/// Effective index of the fundamental mode of `geometry` at `lambda`.
pub fn effective_index(
    db: &MaterialDb,
    geometry: &WaveguideGeometry,
    lambda: f64,
    polarization: Polarization,
) -> Result<f64> {
    solve_eim(db, geometry, lambda, polarization).map(|m| m.n_eff)
}
