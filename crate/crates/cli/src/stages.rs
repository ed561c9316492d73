//! One function per pipeline stage. Each writes its CSV, mesh and image
//! outputs into a directory it owns and returns the rows it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use chainshell::fem::{AnalysisSettings, Support, SupportLayout};
use chainshell::filter::{auto_select, measure_all, select_distinct, SurfaceMetrics, Tolerance};
use chainshell::loads::{deflection_limit_mm, load_case};
use chainshell::optimizer::{self, OptimizationReport};
use chainshell::profile2d::{parse_envelopes, sweep_2d, FeasibilityEnvelope, SweepReport};
use chainshell::shell3d::{
    depth_map, generate_iterations, group_parameters, interpolate_surface, ControlGrid, GeneratorConfig, ShellSurface,
};
use chainshell::units::{
    calibrate_pitch, moment_of_inertia, sheet_weight, solid_to_gap_ratio, unit_volume_mm3, Shape, SheetSpec, UnitCell,
};

use crate::config::PipelineConfig;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitsRow {
    pub shape: String,
    pub member_length_mm: f64,
    pub rod_diameter_mm: f64,
    pub cell_pitch_mm: f64,
    pub solid_to_gap_ratio: f64,
    pub moment_of_inertia: f64,
    pub unit_volume_mm3: f64,
    pub weight_per_unit_g: f64,
    pub sheet_rows: usize,
    pub sheet_cols: usize,
    pub sheet_weight_g: f64,
}

pub fn units(cfg: &PipelineConfig) -> Result<Vec<UnitsRow>> {
    let cells: Vec<(UnitCell, Option<f64>)> = if cfg.units.cells.is_empty() {
        Shape::ALL.iter().map(|&s| (UnitCell::reference(s), None)).collect()
    } else {
        cfg.units
            .cells
            .iter()
            .map(|c| Ok((UnitCell::new(c.shape.parse()?, c.length_mm, c.rod_diameter_mm, 1.0)?, c.pitch_mm)))
            .collect::<Result<_>>()?
    };
    cells
        .into_iter()
        .map(|(base, pitch)| {
            let pitch = match pitch {
                Some(p) => p,
                None => calibrate_pitch(&base, cfg.units.target_ratio)?,
            };
            let cell = base.with_pitch(pitch);
            let sheet = SheetSpec {
                unit: cell,
                grid_rows: cfg.units.sheet_rows,
                grid_cols: cfg.units.sheet_cols,
                density_g_cm3: cfg.units.density_g_cm3,
            };
            let volume = unit_volume_mm3(&cell);
            Ok(UnitsRow {
                shape: cell.shape.name().to_string(),
                member_length_mm: cell.member_length_mm,
                rod_diameter_mm: cell.rod_diameter_mm,
                cell_pitch_mm: pitch,
                solid_to_gap_ratio: solid_to_gap_ratio(&cell)?,
                moment_of_inertia: moment_of_inertia(&cell)?,
                unit_volume_mm3: volume,
                weight_per_unit_g: volume * cfg.units.density_g_cm3 * 1e-3,
                sheet_rows: sheet.grid_rows,
                sheet_cols: sheet.grid_cols,
                sheet_weight_g: sheet_weight(&sheet)?,
            })
        })
        .collect()
}

/// Envelope for `shape`: from the configured table if any, else the built-in one.
pub fn envelope_for(cfg: &PipelineConfig, shape: Shape) -> Result<FeasibilityEnvelope> {
    match &cfg.sweep2d.envelope {
        None => Ok(FeasibilityEnvelope::default_for(shape)),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading envelope {path}"))?;
            parse_envelopes(&text)?
                .into_iter()
                .find(|e| e.shape == shape)
                .ok_or_else(|| anyhow!("envelope {path} has no {shape} entries"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub shape: String,
    pub amplitude_mm: f64,
    pub frequency: u32,
    pub feasible: bool,
    pub peak_curvature_per_mm: f64,
}

pub fn sweep(cfg: &PipelineConfig, shape: Shape) -> Result<(SweepReport, Vec<SweepRow>)> {
    let env = envelope_for(cfg, shape)?;
    let report = sweep_2d(&env, cfg.sweep2d.max_frequency, cfg.sweep2d.span_mm)?;
    let rows = report
        .cells
        .iter()
        .map(|c| SweepRow {
            shape: shape.name().to_string(),
            amplitude_mm: c.amplitude_mm,
            frequency: c.frequency,
            feasible: c.feasible,
            peak_curvature_per_mm: c.peak_curvature_per_mm,
        })
        .collect();
    Ok((report, rows))
}

/// Parameters of one generation batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub label: String,
    pub shape: String,
    pub amplitude_mm: f64,
    pub frequency: u32,
    pub iterations: usize,
    pub seed: u64,
    pub resolution: usize,
    pub control_density: u32,
    pub perturbation_divisor: f64,
}

impl GroupInfo {
    /// Group `g` of the configuration, seeded from the top-level seed by name.
    pub fn for_group(cfg: &PipelineConfig, group: u32) -> Result<Self> {
        let (a, f) = group_parameters(group);
        let label = format!("G{group}");
        Ok(GroupInfo {
            seed: chainshell::rng::derive_seed(cfg.seed, &format!("gen3d/{label}")),
            label,
            shape: cfg.sweep_shape()?.name().to_string(),
            amplitude_mm: a,
            frequency: f,
            iterations: cfg.gen3d.iterations,
            resolution: cfg.gen3d.resolution,
            control_density: cfg.gen3d.control_density,
            perturbation_divisor: cfg.gen3d.perturbation_divisor,
        })
    }

    /// Arbitrary `(A, f)` batch seeded directly with the top-level seed.
    pub fn custom(cfg: &PipelineConfig, amplitude_mm: f64, frequency: u32) -> Result<Self> {
        Ok(GroupInfo {
            label: format!("A{amplitude_mm}-f{frequency}"),
            shape: cfg.sweep_shape()?.name().to_string(),
            amplitude_mm,
            frequency,
            iterations: cfg.gen3d.iterations,
            seed: cfg.seed,
            resolution: cfg.gen3d.resolution,
            control_density: cfg.gen3d.control_density,
            perturbation_divisor: cfg.gen3d.perturbation_divisor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub iteration: usize,
    pub seed: u64,
    pub min_z: f64,
    pub max_z: f64,
    pub area_m2: f64,
    pub perimeter_m: f64,
}

pub const GROUP_FILE: &str = "group.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SELECTED_FILE: &str = "selected.csv";

pub fn control_file(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("iter_{iteration:02}_control.toml"))
}

/// Generate, mesh and render every iteration of a group into `out`.
pub fn gen3d(cfg: &PipelineConfig, group: &GroupInfo, out: &Path) -> Result<Vec<ManifestRow>> {
    let shape: Shape = group.shape.parse()?;
    let env = envelope_for(cfg, shape)?;
    let gen = GeneratorConfig {
        control_density: group.control_density,
        perturbation_divisor: group.perturbation_divisor,
        span_mm: cfg.sweep2d.span_mm,
    };
    let grids = generate_iterations(group.amplitude_mm, group.frequency, group.iterations, group.seed, &env, &gen)?;
    let surfaces: Vec<ShellSurface> = grids
        .iter()
        .map(|g| interpolate_surface(g, group.resolution))
        .collect::<chainshell::Result<_>>()?;
    let metrics = measure_all(&surfaces)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&out.join(GROUP_FILE), std::slice::from_ref(group))?;
    let mut rows = Vec::with_capacity(surfaces.len());
    for (s, m) in surfaces.iter().zip(&metrics) {
        let i = s.control.iteration;
        write_file(&out.join(format!("iter_{i:02}.obj")), s.mesh.to_obj())?;
        write_file(&out.join(format!("iter_{i:02}.pgm")), depth_map(s, cfg.gen3d.depth_resolution).to_pgm())?;
        write_file(&control_file(out, i), toml::to_string(&s.control)?)?;
        let (min_z, max_z) = s.mesh.z_range();
        rows.push(ManifestRow {
            iteration: i,
            seed: group.seed,
            min_z,
            max_z,
            area_m2: m.area_m2,
            perimeter_m: m.perimeter_m,
        });
    }
    write_csv(&out.join(MANIFEST_FILE), &rows)?;
    Ok(rows)
}

pub fn read_group(dir: &Path) -> Result<GroupInfo> {
    read_csv::<GroupInfo>(&dir.join(GROUP_FILE))?
        .into_iter()
        .next()
        .ok_or_else(|| anyhow!("{} is empty", dir.join(GROUP_FILE).display()))
}

pub fn load_surface(dir: &Path, iteration: usize, resolution: usize) -> Result<ShellSurface> {
    let path = control_file(dir, iteration);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let grid: ControlGrid = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(interpolate_surface(&grid, resolution)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedRow {
    pub model_id: String,
    pub iteration: usize,
    pub perimeter_m: f64,
    pub area_m2: f64,
    pub kept: bool,
    pub tolerance_perimeter_m: f64,
    pub tolerance_area_m2: f64,
}

/// Select distinct iterations of the generation batch in `gen_dir`.
pub fn filter(cfg: &PipelineConfig, gen_dir: &Path, out: &Path) -> Result<Vec<SelectedRow>> {
    let group = read_group(gen_dir)?;
    let manifest: Vec<ManifestRow> = read_csv(&gen_dir.join(MANIFEST_FILE))?;
    if manifest.is_empty() {
        bail!("{} lists no iterations", gen_dir.join(MANIFEST_FILE).display());
    }
    let metrics: Vec<SurfaceMetrics> = manifest
        .iter()
        .map(|r| SurfaceMetrics {
            perimeter_m: r.perimeter_m,
            area_m2: r.area_m2,
        })
        .collect();
    let keep = cfg.filter.keep;
    let selection = match cfg.filter.tolerance.as_str() {
        "fixed" => select_distinct(
            &metrics,
            Tolerance {
                perimeter_m: cfg.filter.perimeter_tolerance_m,
                area_m2: cfg.filter.area_tolerance_m2,
            },
            keep,
        )?,
        _ if metrics.len() < 2 => select_distinct(&metrics, Tolerance::zero(), keep)?,
        _ => auto_select(&metrics, keep)?,
    };
    let rows: Vec<SelectedRow> = manifest
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let rank = selection.kept.iter().position(|&i| i == k);
            SelectedRow {
                model_id: rank.map_or_else(String::new, |p| format!("{}-{}", group.label, p + 1)),
                iteration: r.iteration,
                perimeter_m: r.perimeter_m,
                area_m2: r.area_m2,
                kept: rank.is_some(),
                tolerance_perimeter_m: selection.tolerance.perimeter_m,
                tolerance_area_m2: selection.tolerance.area_m2,
            }
        })
        .collect();
    write_csv(&out.join(SELECTED_FILE), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadsRow {
    pub dead_kn: f64,
    pub live_kn: f64,
    pub snow_kn: f64,
    pub wind_kn: f64,
    pub total_kn: f64,
    pub deflection_limit_mm: f64,
}

pub fn loads(cfg: &PipelineConfig, surface_area_m2: Option<f64>) -> Result<LoadsRow> {
    let spec = cfg.loads.structure();
    let lc = load_case(
        &spec,
        surface_area_m2.unwrap_or(spec.plan_area_m2),
        cfg.loads.snow_shape_factor,
        cfg.loads.wind_shape_factor,
    )?;
    Ok(LoadsRow {
        dead_kn: lc.dead_kn,
        live_kn: lc.live_kn,
        snow_kn: lc.snow_kn,
        wind_kn: lc.wind_kn,
        total_kn: lc.total_kn,
        deflection_limit_mm: deflection_limit_mm(spec.span_m)?,
    })
}

/// Support layout file: one directive per line, `#` comments.
///
/// ```text
/// boundary fixed
/// corners pinned
/// point 1.0 0.0 sliding
/// ```
pub fn parse_supports(text: &str) -> Result<SupportLayout> {
    let mut points = Vec::new();
    let mut layout = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let ctx = || format!("supports line {}: `{raw}`", n + 1);
        match f.as_slice() {
            ["boundary", kind] => layout = Some(SupportLayout::Boundary(Support::parse(kind).with_context(ctx)?)),
            ["corners", kind] => layout = Some(SupportLayout::Corners(Support::parse(kind).with_context(ctx)?)),
            ["point", x, y, kind] => {
                let x: f64 = x.parse().with_context(ctx)?;
                let y: f64 = y.parse().with_context(ctx)?;
                points.push(([x, y], Support::parse(kind).with_context(ctx)?));
            }
            _ => bail!("{}: expected `boundary <kind>`, `corners <kind>` or `point <x> <y> <kind>`", ctx()),
        }
    }
    match (layout, points.is_empty()) {
        (Some(l), true) => Ok(l),
        (None, false) => Ok(SupportLayout::Points(points)),
        (Some(_), false) => bail!("supports: mix of layout and point directives"),
        (None, true) => bail!("supports: no directives"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementRow {
    pub model_id: String,
    pub dead_kn: f64,
    pub live_kn: f64,
    pub snow_kn: f64,
    pub wind_kn: f64,
    pub total_kn: f64,
    pub max_displacement_mm: f64,
    pub deflection_limit_mm: f64,
    pub pass: bool,
}

/// Analyse every kept surface listed in `selected` (paired with the
/// directory holding its control grids).
pub fn analyze(settings: &AnalysisSettings, selected: &[(PathBuf, PathBuf)]) -> Result<Vec<DisplacementRow>> {
    use rayon::prelude::*;
    let mut jobs = Vec::new();
    for (sel, gen_dir) in selected {
        let group = read_group(gen_dir)?;
        for r in read_csv::<SelectedRow>(sel)?.into_iter().filter(|r| r.kept) {
            jobs.push((r.model_id, gen_dir.clone(), r.iteration, group.resolution));
        }
    }
    jobs.par_iter()
        .map(|(id, dir, it, res)| {
            let surface = load_surface(dir, *it, *res)?;
            let a = settings.analyze(&surface).with_context(|| format!("analysing {id}"))?;
            Ok(DisplacementRow {
                model_id: id.clone(),
                dead_kn: a.load_case.dead_kn,
                live_kn: a.load_case.live_kn,
                snow_kn: a.load_case.snow_kn,
                wind_kn: a.load_case.wind_kn,
                total_kn: a.load_case.total_kn,
                max_displacement_mm: a.max_displacement_mm,
                deflection_limit_mm: a.deflection_limit_mm,
                pass: a.passes,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDisplacementRow {
    pub node: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub ux_mm: f64,
    pub uy_mm: f64,
    pub uz_mm: f64,
    pub translation_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerRow {
    pub candidate_id: String,
    pub anchor_kind: String,
    pub weighted_score: f64,
    pub load_bearing_columns: usize,
    pub formwork_columns: usize,
    pub formwork_removed: usize,
    pub max_displacement_mm: f64,
    pub deflection_limit_mm: f64,
    pub pass: bool,
}

pub const RANKING_FILE: &str = "ranking.csv";
pub const WINNER_FILE: &str = "winner.csv";

/// Run the shelter optimisation and write its ranking, winner mesh,
/// winner displacements and drainage markers.
pub fn optimize(cfg: &PipelineConfig, out: &Path) -> Result<OptimizationReport> {
    let opt = cfg.optimizer_config()?;
    let settings = cfg.analysis_settings()?;
    let report = optimizer::optimize(&opt, &settings)?;
    write_file(&out.join(RANKING_FILE), optimizer::ranking_csv(&report))?;
    write_file(&out.join("drainage_markers.csv"), optimizer::drainage_markers_csv(&report))?;
    let winner: Vec<WinnerRow> = match &report.winner {
        None => Vec::new(),
        Some(w) => {
            let c = &report.candidates[w.index];
            write_file(&out.join("winner.obj"), c.surface.mesh.to_obj())?;
            let a = &w.analysis;
            let pts: Vec<f64> = (0..=opt.check_lattice)
                .map(|i| i as f64 * c.surface.span_m() / opt.check_lattice as f64)
                .collect();
            let z = c.surface.heights_on(&pts, &pts);
            let n = pts.len();
            let nodes: Vec<NodeDisplacementRow> = a
                .result
                .displacements
                .iter()
                .enumerate()
                .map(|(k, d)| NodeDisplacementRow {
                    node: k,
                    x_m: pts[k % n],
                    y_m: pts[k / n],
                    z_m: z[k],
                    ux_mm: d[0] * 1000.0,
                    uy_mm: d[1] * 1000.0,
                    uz_mm: d[2] * 1000.0,
                    translation_mm: (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() * 1000.0,
                })
                .collect();
            write_csv(&out.join("winner_displacements.csv"), &nodes)?;
            let entry = report.ranking.entry_for(w.index).expect("winner is ranked");
            vec![WinnerRow {
                candidate_id: c.id.clone(),
                anchor_kind: c.anchors.kind.name().to_string(),
                weighted_score: entry.score,
                load_bearing_columns: w.columns.load_bearing.len(),
                formwork_columns: w.columns.formwork.len(),
                formwork_removed: c.reduction.as_ref().map_or(0, |r| r.removed.len()),
                max_displacement_mm: a.max_displacement_mm,
                deflection_limit_mm: a.deflection_limit_mm,
                pass: a.passes,
            }]
        }
    };
    if winner.is_empty() {
        write_file(&out.join(WINNER_FILE), "status\nall rejected\n")?;
    } else {
        write_csv(&out.join(WINNER_FILE), &winner)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supports_file_forms() {
        assert_eq!(
            parse_supports("# anchors\nboundary fixed\n").unwrap(),
            SupportLayout::Boundary(Support::Fixed)
        );
        assert_eq!(parse_supports("corners pin").unwrap(), SupportLayout::Corners(Support::Pinned));
        assert_eq!(
            parse_supports("point 0 0 fixed\npoint 2 2 sliding # far corner\n").unwrap(),
            SupportLayout::Points(vec![([0.0, 0.0], Support::Fixed), ([2.0, 2.0], Support::SlidingBase)])
        );
        assert!(parse_supports("").is_err());
        assert!(parse_supports("corners fixed\npoint 0 0 fixed").is_err());
        let err = parse_supports("point 1 x fixed").unwrap_err();
        assert!(format!("{err:#}").contains("line 1"), "{err:#}");
    }
}
