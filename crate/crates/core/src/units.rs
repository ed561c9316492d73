//! Chainmail unit-cell geometry.
//!
//! A unit is modelled as a closed centreline loop of rod diameter `d`
//! projected onto the plane of its square tiling cell. The projected solid
//! area is `centreline length × d`; the gap area is whatever remains of the
//! `pitch²` cell. Interlock overlap between neighbouring rings is not
//! subtracted.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Solid-to-gap ratio used throughout the workflow.
pub const DEFAULT_TARGET_RATIO: f64 = 0.08;

/// Print material density in g/cm³ (PET-like). Only used for weight estimates.
pub const DEFAULT_DENSITY_G_CM3: f64 = 1.38;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Triangular,
    Circular,
    Rectangular,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Triangular, Shape::Circular, Shape::Rectangular];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Triangular => "triangular",
            Shape::Circular => "circular",
            Shape::Rectangular => "rectangular",
        }
    }

    /// Member length and rod diameter of the printed reference units, in mm.
    pub fn reference_dimensions(self) -> (f64, f64) {
        match self {
            Shape::Triangular => (7.5, 1.0),
            Shape::Circular => (11.0, 1.0),
            Shape::Rectangular => (11.0, 1.0),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tri" | "triangle" | "triangular" => Ok(Shape::Triangular),
            "circ" | "circle" | "circular" => Ok(Shape::Circular),
            "rect" | "rectangle" | "rectangular" | "square" => Ok(Shape::Rectangular),
            other => Err(param("shape", format!("unknown shape `{other}`"))),
        }
    }
}

/// One chainmail ring and the square cell it occupies in a sheet.
///
/// `member_length_mm` is the triangle side, the circle circumference, or the
/// square side depending on `shape`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCell {
    pub shape: Shape,
    pub member_length_mm: f64,
    pub rod_diameter_mm: f64,
    pub cell_pitch_mm: f64,
}

impl UnitCell {
    pub fn new(shape: Shape, member_length_mm: f64, rod_diameter_mm: f64, cell_pitch_mm: f64) -> Result<Self> {
        let cell = UnitCell {
            shape,
            member_length_mm,
            rod_diameter_mm,
            cell_pitch_mm,
        };
        cell.validate()?;
        Ok(cell)
    }

    /// A reference unit with the pitch left unset (zero) for later calibration.
    pub fn reference(shape: Shape) -> Self {
        let (l, d) = shape.reference_dimensions();
        UnitCell {
            shape,
            member_length_mm: l,
            rod_diameter_mm: d,
            cell_pitch_mm: 0.0,
        }
    }

    pub fn with_pitch(mut self, pitch_mm: f64) -> Self {
        self.cell_pitch_mm = pitch_mm;
        self
    }

    fn validate_ring(&self) -> Result<()> {
        if !(self.rod_diameter_mm > 0.0) || !self.rod_diameter_mm.is_finite() {
            return Err(param("rod_diameter_mm", format!("must be > 0, got {}", self.rod_diameter_mm)));
        }
        if !(self.member_length_mm > self.rod_diameter_mm) || !self.member_length_mm.is_finite() {
            return Err(param(
                "member_length_mm",
                format!(
                    "must exceed the rod diameter {}, got {}",
                    self.rod_diameter_mm, self.member_length_mm
                ),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_ring()?;
        if !(self.cell_pitch_mm > 0.0) || !self.cell_pitch_mm.is_finite() {
            return Err(param("cell_pitch_mm", format!("must be > 0, got {}", self.cell_pitch_mm)));
        }
        Ok(())
    }

    /// Length of the closed centreline loop in mm.
    pub fn centreline_length_mm(&self) -> f64 {
        let l = self.member_length_mm;
        match self.shape {
            Shape::Triangular => 3.0 * l,
            Shape::Circular => l,
            Shape::Rectangular => 4.0 * l,
        }
    }

    /// Projected solid area of one ring, in mm².
    pub fn solid_area_mm2(&self) -> f64 {
        self.centreline_length_mm() * self.rod_diameter_mm
    }

    /// Gap area of the tiling cell, in mm². Negative when the ring overfills the cell.
    pub fn gap_area_mm2(&self) -> f64 {
        self.cell_pitch_mm * self.cell_pitch_mm - self.solid_area_mm2()
    }
}

/// A rectangular patch of identical interlocked units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetSpec {
    pub unit: UnitCell,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub density_g_cm3: f64,
}

/// `R_sg = V_s / (V_s + V_g)` for the projected-area model.
pub fn solid_to_gap_ratio(cell: &UnitCell) -> Result<f64> {
    cell.validate()?;
    let solid = cell.solid_area_mm2();
    let gap = cell.gap_area_mm2();
    if gap < 0.0 {
        return Err(param(
            "cell_pitch_mm",
            format!(
                "pitch {} mm leaves no gap around a ring of solid area {solid} mm²",
                cell.cell_pitch_mm
            ),
        ));
    }
    Ok(solid / (solid + gap))
}

/// Find the cell pitch that gives `target_ratio`, by bisection on the
/// (strictly decreasing) ratio-versus-pitch curve.
pub fn calibrate_pitch(cell: &UnitCell, target_ratio: f64) -> Result<f64> {
    cell.validate_ring()?;
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(Error::Infeasible(format!(
            "solid-to-gap ratio {target_ratio} is unreachable: a ring cannot fill its cell and must occupy some of it"
        )));
    }
    let ratio_at = |pitch: f64| solid_to_gap_ratio(&cell.with_pitch(pitch));

    // smallest admissible pitch has zero gap, i.e. ratio 1
    let mut lo = cell.solid_area_mm2().sqrt();
    let mut hi = 2.0 * lo;
    let mut guard = 0;
    while ratio_at(hi)? > target_ratio {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Infeasible(format!("no pitch reaches ratio {target_ratio}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = ratio_at(mid)?;
        if (r - target_ratio).abs() < 1e-12 || hi - lo < 1e-13 * hi {
            return Ok(mid);
        }
        if r > target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Section constant of one unit, evaluated exactly as the printed formulas
/// give it (`√3/36·L³·d`, `½R³d²` with `R = L/2π`, `(Lb³ + bL³)·d/12`).
///
/// The circular expression is dimensionally mm⁵ while the other two are mm⁴;
/// the values are not unit-consistent across shapes.
pub fn moment_of_inertia(cell: &UnitCell) -> Result<f64> {
    cell.validate_ring()?;
    let l = cell.member_length_mm;
    let d = cell.rod_diameter_mm;
    Ok(match cell.shape {
        Shape::Triangular => 3f64.sqrt() / 36.0 * l.powi(3) * d,
        Shape::Circular => {
            let r = l / (2.0 * PI);
            0.5 * r.powi(3) * d * d
        }
        Shape::Rectangular => {
            let b = l;
            (l * b.powi(3) + b * l.powi(3)) / 12.0 * d
        }
    })
}

/// Rod volume of one unit in mm³ (centreline length × round rod section).
pub fn unit_volume_mm3(cell: &UnitCell) -> f64 {
    let r = 0.5 * cell.rod_diameter_mm;
    cell.centreline_length_mm() * PI * r * r
}

/// Weight of a sheet in grams.
pub fn sheet_weight(spec: &SheetSpec) -> Result<f64> {
    spec.unit.validate_ring()?;
    if !(spec.density_g_cm3 > 0.0) {
        return Err(param("density_g_cm3", format!("must be > 0, got {}", spec.density_g_cm3)));
    }
    let count = (spec.grid_rows * spec.grid_cols) as f64;
    // g/cm³ → g/mm³
    Ok(count * unit_volume_mm3(&spec.unit) * spec.density_g_cm3 * 1e-3)
}
