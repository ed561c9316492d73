//! Sinusoidal section profiles and the deformation envelope per unit shape.
//!
//! The envelope is data: for each shape and integer grid count `f` it lists
//! the largest amplitude (mm, at the 2 m test span) the sheet can follow.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::units::Shape;

pub const DEFAULT_SPAN_MM: f64 = 2000.0;
pub const AMPLITUDE_STEP_MM: f64 = 5.0;
pub const MAX_SWEEP_AMPLITUDE_MM: f64 = 40.0;
pub const MIN_FREQUENCY: u32 = 3;
pub const DEFAULT_MAX_FREQUENCY: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionProfile {
    pub amplitude_mm: f64,
    pub frequency: u32,
    pub span_mm: f64,
    /// Physical model scale (model length / real length). Metadata only.
    pub model_scale: f64,
}

impl SectionProfile {
    pub fn new(amplitude_mm: f64, frequency: u32) -> Result<Self> {
        let p = SectionProfile {
            amplitude_mm,
            frequency,
            span_mm: DEFAULT_SPAN_MM,
            model_scale: 1.0 / 20.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_mm >= 0.0) {
            return Err(param("amplitude_mm", format!("must be >= 0, got {}", self.amplitude_mm)));
        }
        if !(self.span_mm > 0.0) {
            return Err(param("span_mm", format!("must be > 0, got {}", self.span_mm)));
        }
        if self.frequency < MIN_FREQUENCY {
            return Err(param(
                "frequency",
                format!("grid count must be >= {MIN_FREQUENCY}, got {}", self.frequency),
            ));
        }
        Ok(())
    }

    fn wavenumber(&self) -> f64 {
        2.0 * PI * self.frequency as f64 / self.span_mm
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(0.0..=self.span_mm).contains(&x) {
            return Err(param("x", format!("{x} mm is outside the span [0, {}]", self.span_mm)));
        }
        Ok(())
    }
}

/// `y(x) = A·sin(2πf·x/L)`.
pub fn profile_height(x_mm: f64, p: &SectionProfile) -> Result<f64> {
    p.check_x(x_mm)?;
    Ok(p.amplitude_mm * (p.wavenumber() * x_mm).sin())
}

/// Curvature `|y''| / (1 + y'²)^{3/2}` of the profile, in 1/mm.
pub fn profile_curvature(x_mm: f64, p: &SectionProfile) -> Result<f64> {
    p.check_x(x_mm)?;
    let k = p.wavenumber();
    let slope = p.amplitude_mm * k * (k * x_mm).cos();
    let second = -p.amplitude_mm * k * k * (k * x_mm).sin();
    Ok(second.abs() / (1.0 + slope * slope).powf(1.5))
}

/// Peak curvature of the profile, reached at the crests where `y' = 0`.
pub fn peak_curvature(amplitude_mm: f64, frequency: u32, span_mm: f64) -> f64 {
    let k = 2.0 * PI * frequency as f64 / span_mm;
    amplitude_mm * k * k
}

/// Maximum followable amplitude per grid count, for one unit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityEnvelope {
    pub shape: Shape,
    pub max_amplitude_mm: BTreeMap<u32, f64>,
}

impl FeasibilityEnvelope {
    pub fn new(shape: Shape, entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut max_amplitude_mm = BTreeMap::new();
        for (f, a) in entries {
            if !(a >= 0.0) {
                return Err(param("max_amplitude_mm", format!("{shape} f = {f}: must be >= 0, got {a}")));
            }
            max_amplitude_mm.insert(f, a);
        }
        Ok(FeasibilityEnvelope { shape, max_amplitude_mm })
    }

    /// Default envelope. The rectangular system peaks at 35 mm for f = 9;
    /// triangular and circular systems stay strictly lower.
    pub fn default_for(shape: Shape) -> Self {
        let table: [f64; 8] = match shape {
            //                  f = 3     4     5     6     7     8     9    10
            Shape::Rectangular => [30.0, 30.0, 30.0, 30.0, 30.0, 35.0, 35.0, 30.0],
            Shape::Circular => [25.0, 25.0, 20.0, 20.0, 15.0, 15.0, 10.0, 10.0],
            Shape::Triangular => [20.0, 20.0, 15.0, 15.0, 10.0, 10.0, 5.0, 5.0],
        };
        FeasibilityEnvelope {
            shape,
            max_amplitude_mm: (MIN_FREQUENCY..).zip(table).collect(),
        }
    }

    pub fn max_amplitude(&self, frequency: u32) -> Option<f64> {
        self.max_amplitude_mm.get(&frequency).copied()
    }

    /// Largest amplitude over all listed frequencies.
    pub fn peak_amplitude(&self) -> f64 {
        self.max_amplitude_mm.values().copied().fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, amplitude_mm: f64, frequency: u32) -> bool {
        self.max_amplitude(frequency).is_some_and(|m| amplitude_mm <= m + 1e-9)
    }

    pub fn check(&self, amplitude_mm: f64, frequency: u32) -> Result<()> {
        let Some(limit) = self.max_amplitude(frequency) else {
            return Err(Error::Infeasible(format!(
                "no {} envelope entry for f = {frequency}",
                self.shape
            )));
        };
        if self.is_feasible(amplitude_mm, frequency) {
            Ok(())
        } else {
            Err(Error::Envelope {
                shape: self.shape.to_string(),
                amplitude_mm,
                frequency,
                limit_mm: limit,
            })
        }
    }
}

/// Parse envelope lines `shape, f, max_A_mm`. Blank lines and `#` comments are skipped.
pub fn parse_envelopes(text: &str) -> Result<Vec<FeasibilityEnvelope>> {
    let mut by_shape: BTreeMap<Shape, Vec<(u32, f64)>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split([',', ' ', '\t']).filter(|s| !s.is_empty()).collect();
        let bad = |what: &str| param("envelope", format!("line {}: {what}: `{raw}`", lineno + 1));
        if fields.len() != 3 {
            return Err(bad("expected `shape, f, max_A_mm`"));
        }
        let shape: Shape = fields[0].parse().map_err(|_| bad("unknown shape"))?;
        let f: u32 = fields[1].parse().map_err(|_| bad("frequency must be a non-negative integer"))?;
        let a: f64 = fields[2].parse().map_err(|_| bad("amplitude must be a number"))?;
        by_shape.entry(shape).or_default().push((f, a));
    }
    by_shape
        .into_iter()
        .map(|(shape, entries)| FeasibilityEnvelope::new(shape, entries))
        .collect()
}

pub fn format_envelopes(envelopes: &[FeasibilityEnvelope]) -> String {
    let mut out = String::from("# shape, f, max_A_mm\n");
    for env in envelopes {
        for (f, a) in &env.max_amplitude_mm {
            out.push_str(&format!("{}, {f}, {a}\n", env.shape));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub amplitude_mm: f64,
    pub frequency: u32,
    pub feasible: bool,
    pub peak_curvature_per_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub shape: Shape,
    /// Row-major by amplitude, then frequency.
    pub cells: Vec<SweepCell>,
    /// Lexicographically largest feasible (A, f) with A > 0.
    pub maximal: Option<(f64, u32)>,
}

impl SweepReport {
    pub fn amplitudes(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.cells.iter().map(|c| c.amplitude_mm).collect();
        a.dedup();
        a
    }

    pub fn cell(&self, amplitude_mm: f64, frequency: u32) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.amplitude_mm == amplitude_mm && c.frequency == frequency)
    }
}

/// Enumerate A ∈ {0, 5, …, 40} mm and f ∈ {3, …, max_frequency} and flag each
/// cell against the envelope.
pub fn sweep_2d(envelope: &FeasibilityEnvelope, max_frequency: u32, span_mm: f64) -> Result<SweepReport> {
    if max_frequency < MIN_FREQUENCY {
        return Err(param("max_frequency", format!("must be >= {MIN_FREQUENCY}")));
    }
    for f in MIN_FREQUENCY..=max_frequency {
        if envelope.max_amplitude(f).is_none() {
            return Err(param(
                "envelope",
                format!("{} envelope has no entry for f = {f}", envelope.shape),
            ));
        }
    }
    let steps = (MAX_SWEEP_AMPLITUDE_MM / AMPLITUDE_STEP_MM).round() as u32;
    let grid: Vec<(f64, u32)> = (0..=steps)
        .flat_map(|i| (MIN_FREQUENCY..=max_frequency).map(move |f| (i as f64 * AMPLITUDE_STEP_MM, f)))
        .collect();
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(a, f)| SweepCell {
            amplitude_mm: a,
            frequency: f,
            feasible: envelope.is_feasible(a, f),
            peak_curvature_per_mm: peak_curvature(a, f, span_mm),
        })
        .collect();
    let maximal = cells
        .iter()
        .filter(|c| c.feasible && c.amplitude_mm > 0.0)
        .map(|c| (c.amplitude_mm, c.frequency))
        .max_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    Ok(SweepReport {
        shape: envelope.shape,
        cells,
        maximal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_examples() {
        let p = SectionProfile::new(35.0, 9).unwrap();
        assert_eq!(profile_height(0.0, &p).unwrap(), 0.0);
        let quarter = p.span_mm / (4.0 * 9.0);
        assert!((profile_height(quarter, &p).unwrap() - 35.0).abs() < 1e-12);
        // 35·sin(0.9π)
        assert!((profile_height(100.0, &p).unwrap() - 10.815_594_803_123_163).abs() < 1e-9);
        assert!(profile_height(2000.5, &p).is_err());
        assert!(profile_height(-1.0, &p).is_err());
    }

    #[test]
    fn curvature_examples() {
        let flat = SectionProfile::new(0.0, 5).unwrap();
        for x in [0.0, 123.0, 1999.0] {
            assert_eq!(profile_curvature(x, &flat).unwrap(), 0.0);
        }
        let p = SectionProfile::new(35.0, 9).unwrap();
        let crest = p.span_mm / 36.0;
        let k = profile_curvature(crest, &p).unwrap();
        assert!((k - 0.027_980_328_477_088_33).abs() < 1e-12);
        assert!((k - peak_curvature(35.0, 9, 2000.0)).abs() < 1e-15);
    }

    #[test]
    fn fractional_or_small_frequency_rejected() {
        assert!(SectionProfile::new(10.0, 2).is_err());
        assert!(SectionProfile::new(-1.0, 3).is_err());
    }

    #[test]
    fn rectangular_maximum_is_35_at_9() {
        let report = sweep_2d(&FeasibilityEnvelope::default_for(Shape::Rectangular), 10, 2000.0).unwrap();
        assert_eq!(report.maximal, Some((35.0, 9)));
        assert_eq!(report.cells.len(), 9 * 8);
    }

    #[test]
    fn other_shapes_peak_lower() {
        let rect = FeasibilityEnvelope::default_for(Shape::Rectangular).peak_amplitude();
        for s in [Shape::Triangular, Shape::Circular] {
            assert!(FeasibilityEnvelope::default_for(s).peak_amplitude() < rect);
        }
    }

    #[test]
    fn zero_amplitude_row_always_feasible() {
        for s in Shape::ALL {
            let report = sweep_2d(&FeasibilityEnvelope::default_for(s), 10, 2000.0).unwrap();
            assert!(report.cells.iter().filter(|c| c.amplitude_mm == 0.0).all(|c| c.feasible));
        }
    }

    #[test]
    fn rigid_envelope_only_flat_row() {
        let env = FeasibilityEnvelope::new(Shape::Triangular, (3..=10).map(|f| (f, 0.0))).unwrap();
        let report = sweep_2d(&env, 10, 2000.0).unwrap();
        for c in &report.cells {
            assert_eq!(c.feasible, c.amplitude_mm == 0.0);
        }
        assert_eq!(report.maximal, None);
    }

    #[test]
    fn feasible_set_downward_closed() {
        for s in Shape::ALL {
            let report = sweep_2d(&FeasibilityEnvelope::default_for(s), 10, 2000.0).unwrap();
            for c in report.cells.iter().filter(|c| c.feasible && c.amplitude_mm > 0.0) {
                assert!(report.cell(c.amplitude_mm - 5.0, c.frequency).unwrap().feasible);
            }
        }
    }

    #[test]
    fn envelope_missing_frequency_rejected() {
        let env = FeasibilityEnvelope::new(Shape::Rectangular, [(3, 10.0), (4, 10.0)]).unwrap();
        assert!(sweep_2d(&env, 5, 2000.0).is_err());
    }

    #[test]
    fn envelope_text_round_trip() {
        let envs: Vec<_> = Shape::ALL.iter().map(|&s| FeasibilityEnvelope::default_for(s)).collect();
        let parsed = parse_envelopes(&format_envelopes(&envs)).unwrap();
        assert_eq!(parsed, envs);
        assert!(parse_envelopes("rect, 3").is_err());
        assert!(parse_envelopes("rect, 3, -5").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn height_is_periodic(a in 0.0f64..40.0, f in 3u32..12, frac in 0.0f64..1.0) {
                let p = SectionProfile::new(a, f).unwrap();
                let period = p.span_mm / f as f64;
                let x = frac * (p.span_mm - period);
                let y0 = profile_height(x, &p).unwrap();
                let y1 = profile_height(x + period, &p).unwrap();
                prop_assert!((y0 - y1).abs() < 1e-9);
            }

            #[test]
            fn curvature_matches_central_differences(a in 1.0f64..40.0, f in 3u32..12, frac in 0.01f64..0.99) {
                let p = SectionProfile::new(a, f).unwrap();
                let x = frac * p.span_mm;
                let h = 1e-3;
                let y = |x: f64| profile_height(x, &p).unwrap();
                let d1 = (y(x + h) - y(x - h)) / (2.0 * h);
                let d2 = (y(x + h) - 2.0 * y(x) + y(x - h)) / (h * h);
                let fd = d2.abs() / (1.0 + d1 * d1).powf(1.5);
                let exact = profile_curvature(x, &p).unwrap();
                // skip the inflection points where both vanish
                prop_assume!(exact > 1e-4 * peak_curvature(a, f, p.span_mm));
                // second differences lose ~4·eps·|y|/h² to cancellation, and the sine
                // argument k·x carries its own rounding; that floor is added to the 1e-6 budget
                let phase = 1.0 + 2.0 * std::f64::consts::PI * f as f64;
                let floor = 8.0 * f64::EPSILON * a * phase / (h * h) / exact;
                prop_assert!(((fd - exact) / exact).abs() < 1e-6 + floor, "fd {fd} exact {exact}");
            }
        }
    }
}
