//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are evaluated like the others and
//! are expected to fail; the run fails if any other criterion fails or if a
//! known-unattainable one starts passing.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use chainshell::fem::{
    analyze_shell, solve, AnalysisSettings, Element, ElementKind, FrameModel, Material, Section, Support,
};
use chainshell::filter::{auto_select, is_distinct, measure_all};
use chainshell::loads::{deflection_limit_mm, load_case, StructureSpec};
use chainshell::optimizer::{
    grade, optimize, rank_designs, ranking_csv, Metrics, OptimizationReport, OptimizerConfig, Orientation, Weights,
};
use chainshell::profile2d::{sweep_2d, FeasibilityEnvelope, DEFAULT_MAX_FREQUENCY, DEFAULT_SPAN_MM};
use chainshell::rng::derive_seed;
use chainshell::shell3d::{
    depth_map, generate_iterations, group_parameters, interpolate_surface, ControlGrid, GeneratorConfig, ShellSurface,
};
use chainshell::spline::lattice_points;
use chainshell::units::{
    calibrate_pitch, moment_of_inertia, sheet_weight, solid_to_gap_ratio, Shape, SheetSpec, UnitCell,
    DEFAULT_DENSITY_G_CM3, DEFAULT_TARGET_RATIO,
};

const KNOWN_UNATTAINABLE: &[u32] = &[10];

type Check = Result<String, String>;

type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn loads_table() -> Check {
    let spec = StructureSpec::default();
    let lc = load_case(&spec, 4.0, 0.8, 0.75).map_err(e)?;
    for (name, got, want) in [("LL", lc.live_kn, 1.60), ("SL", lc.snow_kn, 2.88), ("WL", lc.wind_kn, 3.21)] {
        ensure((got - want).abs() <= 1e-9, || format!("{name} = {got}, expected {want}"))?;
    }
    let n = 10_000;
    let start = Instant::now();
    for k in 0..n {
        std::hint::black_box(load_case(&spec, std::hint::black_box(4.0 + k as f64 * 1e-6), 0.8, 0.75).map_err(e)?);
    }
    let per_call = start.elapsed() / n;
    ensure(per_call < Duration::from_millis(1), || format!("{per_call:?} per load case"))?;
    Ok(format!("LL {:.2}, SL {:.2}, WL {:.2} kN; {per_call:?} per call", lc.live_kn, lc.snow_kn, lc.wind_kn))
}

fn deflection_limit() -> Check {
    let v = deflection_limit_mm(2.0).map_err(e)?;
    ensure(v == 8.0, || format!("limit {v} mm"))?;
    Ok("L = 2 m gives 8 mm".into())
}

fn moments_of_inertia() -> Check {
    let mut out = Vec::new();
    for (shape, want) in [(Shape::Triangular, 20.30), (Shape::Circular, 2.683), (Shape::Rectangular, 2440.17)] {
        let got = moment_of_inertia(&UnitCell::reference(shape)).map_err(e)?;
        ensure(rel(got, want) <= 0.005, || format!("{shape}: {got} vs {want}"))?;
        out.push(format!("{shape} {got:.4}"));
    }
    Ok(out.join(", "))
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

fn polygon_distance(p: [f64; 2], v: &[[f64; 2]]) -> f64 {
    (0..v.len())
        .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Fraction of a `pitch × pitch` cell covered by the ring band, by pixel count.
fn rasterized_ratio(cell: &UnitCell, n: usize) -> f64 {
    let (l, half_d, p) = (cell.member_length_mm, 0.5 * cell.rod_diameter_mm, cell.cell_pitch_mm);
    let inside: Box<dyn Fn([f64; 2]) -> bool + Sync> = match cell.shape {
        Shape::Circular => {
            let r = l / (2.0 * PI);
            Box::new(move |q| ((q[0] * q[0] + q[1] * q[1]).sqrt() - r).abs() <= half_d)
        }
        Shape::Triangular => {
            let rc = l / 3f64.sqrt();
            let v: Vec<[f64; 2]> = (0..3)
                .map(|k| {
                    let a = PI / 2.0 + k as f64 * 2.0 * PI / 3.0;
                    [rc * a.cos(), rc * a.sin()]
                })
                .collect();
            Box::new(move |q| polygon_distance(q, &v) <= half_d)
        }
        Shape::Rectangular => {
            let h = 0.5 * l;
            let v = vec![[-h, -h], [h, -h], [h, h], [-h, h]];
            Box::new(move |q| polygon_distance(q, &v) <= half_d)
        }
    };
    let px = p / n as f64;
    let covered: usize = (0..n)
        .into_par_iter()
        .map(|row| {
            let y = -0.5 * p + (row as f64 + 0.5) * px;
            (0..n).filter(|&col| inside([-0.5 * p + (col as f64 + 0.5) * px, y])).count()
        })
        .sum();
    covered as f64 / (n * n) as f64
}

fn solid_to_gap() -> Check {
    let mut out = Vec::new();
    for shape in Shape::ALL {
        let reference = UnitCell::reference(shape);
        let pitch = calibrate_pitch(&reference, DEFAULT_TARGET_RATIO).map_err(e)?;
        let cell = reference.with_pitch(pitch);
        let ratio = solid_to_gap_ratio(&cell).map_err(e)?;
        ensure((ratio - 0.08).abs() <= 0.005, || format!("{shape}: ratio {ratio}"))?;
        let raster = rasterized_ratio(&cell, 2048);
        ensure((raster - 0.08).abs() <= 0.005, || format!("{shape}: raster ratio {raster}"))?;
        ensure((raster - ratio).abs() <= 0.005, || format!("{shape}: {ratio} vs raster {raster}"))?;
        out.push(format!("{shape} {ratio:.4}/{raster:.4}"));
    }
    Ok(format!("computed/rasterized: {}", out.join(", ")))
}

fn line_model(n_el: usize, len: f64, axis: [f64; 3]) -> FrameModel {
    let nodes = (0..=n_el)
        .map(|i| {
            let s = len * i as f64 / n_el as f64;
            [axis[0] * s, axis[1] * s, axis[2] * s]
        })
        .collect();
    let elements = (0..n_el)
        .map(|i| Element {
            nodes: [i, i + 1],
            section: Section::rectangle(0.05, 0.08),
            kind: ElementKind::Beam,
        })
        .collect();
    FrameModel {
        nodes,
        elements,
        supports: BTreeMap::new(),
        material: Material::default(),
    }
}

fn group_surface(group: u32, seed: u64, iteration: usize) -> Result<ShellSurface, String> {
    let (a, f) = group_parameters(group);
    let env = FeasibilityEnvelope::default_for(Shape::Rectangular);
    let grids = generate_iterations(a, f, iteration + 1, seed, &env, &GeneratorConfig::default()).map_err(e)?;
    interpolate_surface(&grids[iteration], 64).map_err(e)
}

fn fem_closed_form() -> Check {
    let section = Section::rectangle(0.05, 0.08);
    let ei = Material::default().elastic_modulus_pa * section.iy_m4;
    let mut worst_residual: f64 = 0.0;

    let (p, len) = (250.0, 1.5);
    let mut cant = line_model(1, len, [1.0, 0.0, 0.0]);
    cant.supports.insert(0, Support::Fixed);
    let mut loads = vec![[0.0; 6]; 2];
    loads[1][2] = -p;
    let r = solve(&cant, &loads).map_err(e)?;
    let tip = -r.displacements[1][2];
    let exact = p * len.powi(3) / (3.0 * ei);
    ensure(rel(tip, exact) <= 0.005, || format!("cantilever {tip} vs {exact}"))?;
    worst_residual = worst_residual.max(r.equilibrium_residual());

    let (w, span, n_el) = (800.0, 4.0, 16);
    let mut ss = line_model(n_el, span, [0.0, 1.0, 0.0]);
    ss.supports.insert(0, Support::Custom([true, true, true, false, true, false]));
    ss.supports.insert(n_el, Support::Custom([true, false, true, false, false, false]));
    let h = span / n_el as f64;
    let loads: Vec<[f64; 6]> = (0..=n_el)
        .map(|i| {
            let share = if i == 0 || i == n_el { 0.5 } else { 1.0 };
            [0.0, 0.0, -w * h * share, 0.0, 0.0, 0.0]
        })
        .collect();
    let r = solve(&ss, &loads).map_err(e)?;
    let mid = -r.displacements[n_el / 2][2];
    let exact_mid = 5.0 * w * span.powi(4) / (384.0 * ei);
    ensure(rel(mid, exact_mid) <= 0.01, || format!("simply supported {mid} vs {exact_mid}"))?;
    worst_residual = worst_residual.max(r.equilibrium_residual());

    let settings = AnalysisSettings {
        lattice: 10,
        ..AnalysisSettings::default()
    };
    let mut slowest = Duration::ZERO;
    for g in 1..=4 {
        let surface = group_surface(g, 42, 0)?;
        let area = chainshell::filter::measure(&surface).map_err(e)?.area_m2;
        let lc = settings.load_case(area).map_err(e)?;
        let start = Instant::now();
        let a = analyze_shell(
            &surface,
            10,
            &settings.section(),
            settings.material,
            &settings.supports,
            &lc,
            settings.precompression_n,
        )
        .map_err(e)?;
        slowest = slowest.max(start.elapsed());
        worst_residual = worst_residual.max(a.result.equilibrium_residual());
    }
    ensure(worst_residual < 1e-6, || format!("equilibrium residual {worst_residual:e}"))?;
    ensure(slowest < Duration::from_secs(1), || format!("10×10 shell solve took {slowest:?}"))?;
    Ok(format!(
        "cantilever err {:.1e}, midspan err {:.2}%, residual {worst_residual:.1e}, 10×10 shell {slowest:?}",
        rel(tip, exact),
        100.0 * rel(mid, exact_mid)
    ))
}

fn group_trend() -> Check {
    let start = Instant::now();
    let settings = AnalysisSettings::default();
    let mut means = Vec::new();
    let mut worst: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for g in 1..=4u32 {
        let (a, f) = group_parameters(g);
        let env = FeasibilityEnvelope::default_for(Shape::Rectangular);
        let seed = derive_seed(7, &format!("gen3d/G{g}"));
        let grids = generate_iterations(a, f, 20, seed, &env, &GeneratorConfig::default()).map_err(e)?;
        let surfaces: Vec<ShellSurface> = grids
            .iter()
            .map(|gr| interpolate_surface(gr, 64))
            .collect::<chainshell::Result<_>>()
            .map_err(e)?;
        let sel = auto_select(&measure_all(&surfaces).map_err(e)?, 4).map_err(e)?;
        ensure(sel.kept.len() == 4, || format!("group {g} kept {}", sel.kept.len()))?;
        let results: Vec<(f64, f64, f64)> = sel
            .kept
            .par_iter()
            .map(|&i| {
                settings
                    .analyze(&surfaces[i])
                    .map(|r| (r.max_displacement_mm, r.deflection_limit_mm, r.result.equilibrium_residual()))
            })
            .collect::<chainshell::Result<_>>()
            .map_err(e)?;
        for &(d, limit, res) in &results {
            ensure(d <= limit && limit == 8.0, || format!("group {g}: {d} mm over {limit} mm"))?;
            worst = worst.max(d);
            worst_residual = worst_residual.max(res);
        }
        means.push(results.iter().map(|r| r.0).sum::<f64>() / 4.0);
    }
    let elapsed = start.elapsed();
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    ensure(means.windows(2).all(|w| w[0] > w[1]), || {
        format!("group means not strictly decreasing: {}", shown.join(" > "))
    })?;
    ensure(worst_residual < 1e-6, || format!("equilibrium residual {worst_residual:e}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("16-model run took {elapsed:?}"))?;
    Ok(format!(
        "means {} mm, max {worst:.3} mm <= 8 mm, {:.2} s",
        shown.join(" > "),
        elapsed.as_secs_f64()
    ))
}

fn filter_group4() -> Check {
    let (a, f) = group_parameters(4);
    let env = FeasibilityEnvelope::default_for(Shape::Rectangular);
    let grids = generate_iterations(a, f, 20, 42, &env, &GeneratorConfig::default()).map_err(e)?;
    let surfaces: Vec<ShellSurface> = grids
        .iter()
        .map(|g| interpolate_surface(g, 64))
        .collect::<chainshell::Result<_>>()
        .map_err(e)?;
    let metrics = measure_all(&surfaces).map_err(e)?;
    let sel = auto_select(&metrics, 4).map_err(e)?;
    ensure(sel.kept.len() == 4, || format!("kept {}", sel.kept.len()))?;
    let tol = sel.tolerance;
    for (x, &i) in sel.kept.iter().enumerate() {
        for &j in &sel.kept[x + 1..] {
            let (mi, mj) = (&metrics[i], &metrics[j]);
            let ok = (mi.perimeter_m - mj.perimeter_m).abs() > tol.perimeter_m
                || (mi.area_m2 - mj.area_m2).abs() > tol.area_m2;
            ensure(ok && is_distinct(mi, mj, &tol), || format!("iterations {i} and {j} are not distinct"))?;
        }
    }
    Ok(format!(
        "kept {:?}, tolerance ΔP {:.2e} m, Δa {:.2e} m²",
        sel.kept, tol.perimeter_m, tol.area_m2
    ))
}

fn optimizer_report() -> &'static Result<OptimizationReport, String> {
    static REPORT: OnceLock<Result<OptimizationReport, String>> = OnceLock::new();
    REPORT.get_or_init(|| optimize(&OptimizerConfig::default(), &AnalysisSettings::default()).map_err(e))
}

fn optimizer_determinism() -> Check {
    let cfg = OptimizerConfig::default();
    let settings = AnalysisSettings::default();
    let run = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(e)?;
        pool.install(|| optimize(&cfg, &settings)).map(|r| ranking_csv(&r)).map_err(e)
    };
    let one = run(1)?;
    let four = run(4)?;
    let again = run(1)?;
    let reference = ranking_csv(optimizer_report().as_ref().map_err(Clone::clone)?);
    ensure(one == four && one == again && one == reference, || "ranking CSVs differ between runs".into())?;
    Ok(format!("{} bytes identical across 1, 4 and default threads", one.len()))
}

fn optimizer_properties() -> Check {
    let report = optimizer_report().as_ref().map_err(Clone::clone)?;
    let passing = report.candidates.iter().filter(|c| c.drainage.passes).count();
    ensure(report.ranking.entries.len() == passing, || "ranked count differs from drainage survivors".into())?;
    for entry in &report.ranking.entries {
        ensure(report.candidates[entry.index].drainage.passes, || {
            format!("{} is ranked despite failing drainage", report.candidates[entry.index].id)
        })?;
    }

    let mut cohort: Vec<Metrics> = report.candidates.iter().map(|c| c.metrics).collect();
    let mut pass: Vec<bool> = report.candidates.iter().map(|c| c.drainage.passes).collect();
    let best = Metrics {
        cms_m2: 0.1,
        ua_m2: 100.0,
        lc_volume_m3: 0.0,
        lc_count: 0,
        fc_volume_m3: 0.0,
        fc_count: 0,
        min_slope: 1.0,
    };
    cohort.push(best);
    pass.push(false);
    let gated = rank_designs(&cohort, &pass, &Weights::default()).map_err(e)?;
    ensure(gated.entry_for(cohort.len() - 1).is_none(), || "a dominant drainage failure was ranked".into())?;

    let values: Vec<f64> = report.candidates.iter().map(|c| c.metrics.cms_m2).collect();
    for orientation in [Orientation::MinimizeBest, Orientation::MaximizeBest] {
        let base = grade(&values, orientation).map_err(e)?;
        for (alpha, beta) in [(2.5, 7.0), (0.01, -3.0), (1e3, 1e3)] {
            let shifted: Vec<f64> = values.iter().map(|v| alpha * v + beta).collect();
            let moved = grade(&shifted, orientation).map_err(e)?;
            let drift = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure(drift < 1e-9, || format!("affine map ({alpha}, {beta}) moved grades by {drift}"))?;
        }
    }

    *pass.last_mut().unwrap() = true;
    let open = rank_designs(&cohort, &pass, &Weights::default()).map_err(e)?;
    let top = open.winner().ok_or("empty ranking")?;
    ensure(top.index == cohort.len() - 1 && top.score == 100.0, || {
        format!("all-criteria winner scored {}", top.score)
    })?;

    let winner = report.winner.as_ref().ok_or("no winner")?;
    let a = &winner.analysis;
    ensure(a.max_displacement_mm <= a.deflection_limit_mm, || {
        format!("winner deflects {} mm over {} mm", a.max_displacement_mm, a.deflection_limit_mm)
    })?;
    Ok(format!(
        "{passing}/{} pass drainage, winner {} at {:.3} mm <= {:.1} mm",
        report.candidates.len(),
        report.candidates[winner.index].id,
        a.max_displacement_mm,
        a.deflection_limit_mm
    ))
}

fn weight_ordering() -> Check {
    let weight = |shape: Shape| -> Result<f64, String> {
        let reference = UnitCell::reference(shape);
        let pitch = calibrate_pitch(&reference, DEFAULT_TARGET_RATIO).map_err(e)?;
        sheet_weight(&SheetSpec {
            unit: reference.with_pitch(pitch),
            grid_rows: 3,
            grid_cols: 3,
            density_g_cm3: DEFAULT_DENSITY_G_CM3,
        })
        .map_err(e)
    };
    let (rect, circ, tri) = (
        weight(Shape::Rectangular)?,
        weight(Shape::Circular)?,
        weight(Shape::Triangular)?,
    );
    let shown = format!("rect {rect:.3} g, circ {circ:.3} g, tri {tri:.3} g");
    ensure(rect < circ && circ < tri, || format!("expected rect < circ < tri, got {shown}"))?;
    Ok(shown)
}

fn sweep_maximum() -> Check {
    let start = Instant::now();
    let mut maximal = None;
    for shape in Shape::ALL {
        let report = sweep_2d(&FeasibilityEnvelope::default_for(shape), DEFAULT_MAX_FREQUENCY, DEFAULT_SPAN_MM)
            .map_err(e)?;
        if shape == Shape::Rectangular {
            maximal = report.maximal;
        }
    }
    let elapsed = start.elapsed();
    ensure(maximal == Some((35.0, 9)), || format!("rectangular maximum {maximal:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("sweep took {elapsed:?}"))?;
    Ok(format!("rectangular maximum A = 35 mm at f = 9; all shapes in {elapsed:?}"))
}

fn depth_maps() -> Check {
    let flat = interpolate_surface(&ControlGrid::flat(8, 2000.0), 32).map_err(e)?;
    let img = depth_map(&flat, 64);
    ensure(img.pixels.iter().all(|&p| p == 255), || "flat surface is not uniformly white".into())?;

    let mut diffs = 0usize;
    for g in 1..=4 {
        let surface = group_surface(g, 5, 1)?;
        let n = 96;
        let img = depth_map(&surface, n);
        let pts = lattice_points(n, surface.span_m());
        let z = surface.heights_on(&pts, &pts);
        let k = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
        let (col, row) = (k % n, n - 1 - k / n);
        ensure(img.get(col, row) == 0, || format!("group {g}: highest sample renders {}", img.get(col, row)))?;
        for factor in [0.5, 3.0] {
            let scaled = depth_map(&surface.scaled(factor).map_err(e)?, n);
            for (a, b) in img.pixels.iter().zip(&scaled.pixels) {
                ensure(a.abs_diff(*b) <= 1, || format!("group {g}: scaling by {factor} changed a pixel {a} -> {b}"))?;
                diffs += usize::from(a != b);
            }
        }
    }
    Ok(format!("flat = 255, peak = 0, scaling changes {diffs} pixels by at most one level"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "load table", loads_table),
        (2, "deflection limit", deflection_limit),
        (3, "moments of inertia", moments_of_inertia),
        (4, "solid-to-gap ratio and raster oracle", solid_to_gap),
        (5, "frame solver against beam theory", fem_closed_form),
        (6, "group displacements and trend", group_trend),
        (7, "group 4 filter", filter_group4),
        (8, "optimizer determinism", optimizer_determinism),
        (9, "optimizer properties", optimizer_properties),
        (10, "sheet weight ordering", weight_ordering),
        (11, "2D sweep maximum", sweep_maximum),
        (12, "depth maps", depth_maps),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let outcome = check();
        let known = KNOWN_UNATTAINABLE.contains(&id);
        match &outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(why) if known => println!("FAIL {id:>2} {name}: {why} (known unattainable)"),
            Err(why) => println!("FAIL {id:>2} {name}: {why}"),
        }
        if outcome.is_ok() == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria as expected");
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
