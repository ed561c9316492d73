//! Pipeline configuration: TOML with one flat table per stage.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use chainshell::fem::{AnalysisSettings, Material, Support, SupportLayout};
use chainshell::loads::StructureSpec;
use chainshell::optimizer::{AnchorKind, ColumnConfig, DrainageRule, OptimizerConfig, Weights};
use chainshell::units::{Shape, UnitCell};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub units: UnitsConfig,
    pub sweep2d: SweepConfig,
    pub gen3d: Gen3dConfig,
    pub filter: FilterConfig,
    pub loads: LoadsConfig,
    pub fem: FemConfig,
    pub optimizer: OptimizerSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            units: UnitsConfig::default(),
            sweep2d: SweepConfig::default(),
            gen3d: Gen3dConfig::default(),
            filter: FilterConfig::default(),
            loads: LoadsConfig::default(),
            fem: FemConfig::default(),
            optimizer: OptimizerSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsConfig {
    pub target_ratio: f64,
    pub density_g_cm3: f64,
    pub sheet_rows: usize,
    pub sheet_cols: usize,
    /// Explicit unit cells; the three reference cells when empty.
    pub cells: Vec<CellConfig>,
}

/// One `[[units.cells]]` entry. Without `pitch_mm` the pitch is calibrated
/// to `target_ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub shape: String,
    pub length_mm: f64,
    pub rod_diameter_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_mm: Option<f64>,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        UnitsConfig {
            target_ratio: chainshell::units::DEFAULT_TARGET_RATIO,
            density_g_cm3: chainshell::units::DEFAULT_DENSITY_G_CM3,
            sheet_rows: 3,
            sheet_cols: 3,
            cells: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub shape: String,
    pub max_frequency: u32,
    pub span_mm: f64,
    /// Optional envelope table (`shape, f, max_A_mm` lines); built-in tables otherwise.
    pub envelope: Option<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            shape: "rectangular".into(),
            max_frequency: chainshell::profile2d::DEFAULT_MAX_FREQUENCY,
            span_mm: chainshell::profile2d::DEFAULT_SPAN_MM,
            envelope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gen3dConfig {
    pub groups: Vec<u32>,
    pub iterations: usize,
    pub resolution: usize,
    pub depth_resolution: usize,
    pub control_density: u32,
    pub perturbation_divisor: f64,
}

impl Default for Gen3dConfig {
    fn default() -> Self {
        Gen3dConfig {
            groups: vec![1, 2, 3, 4],
            iterations: chainshell::shell3d::DEFAULT_ITERATIONS,
            resolution: chainshell::shell3d::DEFAULT_RESOLUTION,
            depth_resolution: 128,
            control_density: 4,
            perturbation_divisor: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub keep: usize,
    /// `auto` or `fixed`.
    pub tolerance: String,
    pub perimeter_tolerance_m: f64,
    pub area_tolerance_m2: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            keep: chainshell::filter::DEFAULT_KEEP,
            tolerance: "auto".into(),
            perimeter_tolerance_m: 0.0,
            area_tolerance_m2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadsConfig {
    pub plan_area_m2: f64,
    pub thickness_m: f64,
    pub span_m: f64,
    pub unit_weight_kn_m3: f64,
    pub solid_fraction: f64,
    pub snow_shape_factor: f64,
    pub wind_shape_factor: f64,
}

impl Default for LoadsConfig {
    fn default() -> Self {
        let s = StructureSpec::default();
        LoadsConfig {
            plan_area_m2: s.plan_area_m2,
            thickness_m: s.thickness_m,
            span_m: s.span_m,
            unit_weight_kn_m3: s.unit_weight_kn_m3,
            solid_fraction: s.solid_fraction,
            snow_shape_factor: chainshell::loads::DEFAULT_SNOW_SHAPE_FACTOR,
            wind_shape_factor: chainshell::loads::DEFAULT_WIND_SHAPE_FACTOR,
        }
    }
}

impl LoadsConfig {
    pub fn structure(&self) -> StructureSpec {
        StructureSpec {
            plan_area_m2: self.plan_area_m2,
            thickness_m: self.thickness_m,
            span_m: self.span_m,
            unit_weight_kn_m3: self.unit_weight_kn_m3,
            solid_fraction: self.solid_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    pub elastic_modulus_pa: f64,
    pub shear_modulus_pa: f64,
    pub lattice: usize,
    /// `<boundary|corners>-<fixed|pinned|sliding>`.
    pub supports: String,
    pub precompression_n: f64,
}

impl Default for FemConfig {
    fn default() -> Self {
        let m = Material::default();
        FemConfig {
            elastic_modulus_pa: m.elastic_modulus_pa,
            shear_modulus_pa: m.shear_modulus_pa,
            lattice: chainshell::fem::DEFAULT_LATTICE,
            supports: "boundary-fixed".into(),
            precompression_n: chainshell::fem::DEFAULT_PRECOMPRESSION_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub anchor_kinds: Vec<String>,
    pub iterations: usize,
    pub amplitude_cap_m: f64,
    /// CMS, UA, LC, FC.
    pub weights: [f64; 4],
    pub slope_threshold: f64,
    /// `ponding` or `strict`.
    pub drainage_rule: String,
    pub control_divisions: usize,
    pub resolution: usize,
    pub column_section_m: f64,
    pub load_bearing_clearance_m: f64,
    pub headroom_m: f64,
    pub formwork_tolerance_fraction: f64,
    pub reaction_lattice: usize,
    pub check_lattice: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        let w = d.weights;
        OptimizerSection {
            anchor_kinds: d.anchor_kinds.iter().map(|k| k.name().to_string()).collect(),
            iterations: d.iterations,
            amplitude_cap_m: d.amplitude_cap_m,
            weights: [w.cms, w.ua, w.lc, w.fc],
            slope_threshold: d.slope_threshold,
            drainage_rule: "ponding".into(),
            control_divisions: d.control_divisions,
            resolution: d.resolution,
            column_section_m: d.columns.section_side_m,
            load_bearing_clearance_m: d.columns.load_bearing_clearance_m,
            headroom_m: d.headroom_m,
            formwork_tolerance_fraction: d.formwork_tolerance_fraction,
            reaction_lattice: d.reaction_lattice,
            check_lattice: d.check_lattice,
        }
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {reason}"))
}

/// Parse `<layout>-<kind>` support shorthand.
pub fn parse_support_layout(s: &str) -> Result<SupportLayout, CliError> {
    let (layout, kind) = s
        .split_once('-')
        .ok_or_else(|| invalid("fem.supports", format!("expected `<boundary|corners>-<kind>`, got `{s}`")))?;
    let kind = Support::parse(kind).map_err(|e| invalid("fem.supports", e))?;
    match layout {
        "boundary" => Ok(SupportLayout::Boundary(kind)),
        "corners" => Ok(SupportLayout::Corners(kind)),
        other => Err(invalid("fem.supports", format!("unknown layout `{other}`"))),
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML rendering; the basis of the config hash.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let u = &self.units;
        if !(u.target_ratio > 0.0 && u.target_ratio < 1.0) {
            return Err(invalid("units.target_ratio", "must lie in (0, 1)"));
        }
        if !(u.density_g_cm3 > 0.0) {
            return Err(invalid("units.density_g_cm3", "must be > 0"));
        }
        if u.sheet_rows == 0 || u.sheet_cols == 0 {
            return Err(invalid("units.sheet_rows", "sheet grid must be at least 1 × 1"));
        }
        for (k, c) in u.cells.iter().enumerate() {
            let shape: Shape = c.shape.parse().map_err(|e| invalid(&format!("units.cells[{k}].shape"), e))?;
            UnitCell::new(shape, c.length_mm, c.rod_diameter_mm, c.pitch_mm.unwrap_or(1.0))
                .map_err(|e| invalid(&format!("units.cells[{k}]"), e))?;
        }
        self.sweep_shape()?;
        if self.sweep2d.max_frequency < chainshell::profile2d::MIN_FREQUENCY {
            return Err(invalid("sweep2d.max_frequency", "must be >= 3"));
        }
        if !(self.sweep2d.span_mm > 0.0) {
            return Err(invalid("sweep2d.span_mm", "must be > 0"));
        }
        let g = &self.gen3d;
        if g.groups.is_empty() || g.groups.contains(&0) {
            return Err(invalid("gen3d.groups", "list groups as positive integers"));
        }
        if g.iterations == 0 {
            return Err(invalid("gen3d.iterations", "must be >= 1"));
        }
        if g.resolution < 2 || g.depth_resolution < 2 {
            return Err(invalid("gen3d.resolution", "must be >= 2"));
        }
        if g.control_density == 0 {
            return Err(invalid("gen3d.control_density", "must be >= 1"));
        }
        if !(g.perturbation_divisor > 0.0) {
            return Err(invalid("gen3d.perturbation_divisor", "must be > 0"));
        }
        let f = &self.filter;
        if f.keep == 0 {
            return Err(invalid("filter.keep", "must be >= 1"));
        }
        match f.tolerance.as_str() {
            "auto" => {}
            "fixed" => {
                if !(f.perimeter_tolerance_m >= 0.0 && f.area_tolerance_m2 >= 0.0) {
                    return Err(invalid("filter.perimeter_tolerance_m", "tolerances must be >= 0"));
                }
            }
            other => return Err(invalid("filter.tolerance", format!("expected `auto` or `fixed`, got `{other}`"))),
        }
        self.analysis_settings()?.validate().map_err(|e| match e {
            chainshell::Error::Parameter { name, reason } => {
                let table = if matches!(name, "lattice" | "precompression_n" | "material") { "fem" } else { "loads" };
                invalid(&format!("{table}.{name}"), reason)
            }
            other => invalid("loads", other),
        })?;
        let o = self.optimizer_config()?;
        if !(o.weights.validate().is_ok()) {
            let sum: f64 = self.optimizer.weights.iter().sum();
            return Err(invalid("optimizer.weights", format!("weights must sum to 1, got {sum}")));
        }
        o.validate().map_err(|e| invalid("optimizer", e))?;
        Ok(())
    }

    pub fn sweep_shape(&self) -> Result<Shape, CliError> {
        self.sweep2d.shape.parse().map_err(|e| invalid("sweep2d.shape", e))
    }

    pub fn analysis_settings(&self) -> Result<AnalysisSettings, CliError> {
        let fem = &self.fem;
        Ok(AnalysisSettings {
            structure: self.loads.structure(),
            snow_shape_factor: self.loads.snow_shape_factor,
            wind_shape_factor: self.loads.wind_shape_factor,
            material: Material {
                elastic_modulus_pa: fem.elastic_modulus_pa,
                shear_modulus_pa: fem.shear_modulus_pa,
            },
            lattice: fem.lattice,
            supports: parse_support_layout(&fem.supports)?,
            precompression_n: fem.precompression_n,
        })
    }

    /// Optimiser settings with its seed derived from the top-level seed.
    pub fn optimizer_config(&self) -> Result<OptimizerConfig, CliError> {
        let o = &self.optimizer;
        let anchor_kinds = o
            .anchor_kinds
            .iter()
            .map(|k| k.parse::<AnchorKind>().map_err(|e| invalid("optimizer.anchor_kinds", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let drainage_rule: DrainageRule = o.drainage_rule.parse().map_err(|e| invalid("optimizer.drainage_rule", e))?;
        let [cms, ua, lc, fc] = o.weights;
        Ok(OptimizerConfig {
            anchor_kinds,
            iterations: o.iterations,
            seed: chainshell::rng::derive_seed(self.seed, "optimize"),
            amplitude_cap_m: o.amplitude_cap_m,
            weights: Weights { cms, ua, lc, fc },
            slope_threshold: o.slope_threshold,
            drainage_rule,
            span_m: self.loads.span_m,
            control_divisions: o.control_divisions,
            resolution: o.resolution,
            columns: ColumnConfig {
                section_side_m: o.column_section_m,
                load_bearing_clearance_m: o.load_bearing_clearance_m,
            },
            headroom_m: o.headroom_m,
            formwork_tolerance_fraction: o.formwork_tolerance_fraction,
            reaction_lattice: o.reaction_lattice,
            check_lattice: o.check_lattice,
        })
    }
}
