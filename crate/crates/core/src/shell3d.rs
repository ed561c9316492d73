//! Shell surfaces generated from seeded control grids.
//!
//! A control grid holds `(F + 1)²` heights over an `L × L` plan. Heights are
//! the sinusoidal deformation field `A·sin(2πfx/L)·cos(2πfy/L)` plus a
//! uniform offset in `[0, A/5]`, with the boundary ring anchored at zero.
//! Surfaces interpolate the grid with a tensor-product cubic spline and are
//! triangulated on a regular sample lattice.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::profile2d::FeasibilityEnvelope;
use crate::rng::KeyedStream;
use crate::spline::{lattice_points, BicubicSurface};

pub const DEFAULT_SPAN_MM: f64 = 2000.0;
pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_RESOLUTION: usize = 64;

/// `z(x, y) = A·sin(2πfx/L)·cos(2πfy/L)`.
pub fn base_field(x: f64, y: f64, amplitude: f64, frequency: f64, span: f64) -> f64 {
    let k = 2.0 * PI * frequency / span;
    amplitude * (k * x).sin() * (k * y).cos()
}

/// Amplitude and grid count of design group `g` (1-based): `A = 5(g + 1)` mm, `f = g + 2`.
pub fn group_parameters(group: u32) -> (f64, u32) {
    (5.0 * (group as f64 + 1.0), group + 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    /// Grid divisions per axis.
    pub divisions: usize,
    pub amplitude_mm: f64,
    pub frequency: u32,
    pub span_mm: f64,
    /// Row-major `(divisions + 1)²` heights in mm; `z_mm[j * (F + 1) + i]` sits at `(i·L/F, j·L/F)`.
    pub z_mm: Vec<f64>,
    pub seed: u64,
    pub iteration: usize,
}

impl ControlGrid {
    pub fn points_per_axis(&self) -> usize {
        self.divisions + 1
    }

    pub fn spacing_mm(&self) -> f64 {
        self.span_mm / self.divisions as f64
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z_mm[j * self.points_per_axis() + i]
    }

    /// Grid with every control point on the unperturbed deformation field.
    pub fn from_base_field(amplitude_mm: f64, frequency: u32, divisions: usize, span_mm: f64) -> Self {
        let n = divisions + 1;
        let h = span_mm / divisions as f64;
        let z_mm = (0..n * n)
            .map(|k| base_field((k % n) as f64 * h, (k / n) as f64 * h, amplitude_mm, frequency as f64, span_mm))
            .collect();
        ControlGrid {
            divisions,
            amplitude_mm,
            frequency,
            span_mm,
            z_mm,
            seed: 0,
            iteration: 0,
        }
    }

    /// Flat grid with all heights zero.
    pub fn flat(divisions: usize, span_mm: f64) -> Self {
        let n = divisions + 1;
        ControlGrid {
            divisions,
            amplitude_mm: 0.0,
            frequency: 0,
            span_mm,
            z_mm: vec![0.0; n * n],
            seed: 0,
            iteration: 0,
        }
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.divisions || j == self.divisions
    }

    pub fn validate(&self) -> Result<()> {
        if self.divisions < 1 {
            return Err(param("divisions", "control grid needs at least one division"));
        }
        if self.z_mm.len() != self.points_per_axis().pow(2) {
            return Err(param(
                "z_mm",
                format!("expected {} heights, got {}", self.points_per_axis().pow(2), self.z_mm.len()),
            ));
        }
        if !(self.span_mm > 0.0) {
            return Err(param("span_mm", "must be > 0"));
        }
        if self.z_mm.iter().any(|z| !z.is_finite()) {
            return Err(param("z_mm", "heights must be finite"));
        }
        Ok(())
    }
}

/// Settings for [`generate_iterations`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Control divisions per axis as a multiple of the grid count `f`.
    pub control_density: u32,
    /// Offsets are drawn from `[0, A / divisor]`.
    pub perturbation_divisor: f64,
    pub span_mm: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            control_density: 4,
            perturbation_divisor: 5.0,
            span_mm: DEFAULT_SPAN_MM,
        }
    }
}

/// Generate `n` seeded control grids for `(A, f)`.
///
/// Each interior point receives `base_field + u` with `u ~ U[0, A/5]` drawn
/// from the keyed stream `(seed, iteration, point index)`; boundary points are
/// anchored at zero. Output is bit-identical for identical inputs regardless
/// of thread count.
pub fn generate_iterations(
    amplitude_mm: f64,
    frequency: u32,
    n: usize,
    seed: u64,
    envelope: &FeasibilityEnvelope,
    config: &GeneratorConfig,
) -> Result<Vec<ControlGrid>> {
    if n == 0 {
        return Err(param("iterations", "must be >= 1"));
    }
    if config.control_density == 0 {
        return Err(param("control_density", "must be >= 1"));
    }
    if !(config.perturbation_divisor > 0.0) {
        return Err(param("perturbation_divisor", "must be > 0"));
    }
    envelope.check(amplitude_mm, frequency)?;
    let divisions = (config.control_density * frequency.max(1)) as usize;
    let max_offset = amplitude_mm / config.perturbation_divisor;
    let base = ControlGrid::from_base_field(amplitude_mm, frequency, divisions, config.span_mm);

    Ok((0..n)
        .into_par_iter()
        .map(|iteration| {
            let mut stream = KeyedStream::new(seed, iteration as u64);
            let mut grid = base.clone();
            grid.seed = seed;
            grid.iteration = iteration;
            let npa = grid.points_per_axis();
            for j in 0..npa {
                for i in 0..npa {
                    let k = j * npa + i;
                    grid.z_mm[k] = if grid.is_boundary(i, j) {
                        0.0
                    } else {
                        base.z_mm[k] + max_offset * stream.unit(k as u64)
                    };
                }
            }
            grid
        })
        .collect())
}

/// Offset of each control height above the deformation field (zero on the boundary).
pub fn perturbation_offsets(grid: &ControlGrid) -> Vec<f64> {
    let base = ControlGrid::from_base_field(grid.amplitude_mm, grid.frequency, grid.divisions, grid.span_mm);
    let npa = grid.points_per_axis();
    (0..grid.z_mm.len())
        .map(|k| {
            if grid.is_boundary(k % npa, k / npa) {
                0.0
            } else {
                grid.z_mm[k] - base.z_mm[k]
            }
        })
        .collect()
}

/// Indexed triangle mesh, coordinates in metres.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Regular height-field mesh over `xs × ys` with heights row-major in `ys`.
    /// Each lattice cell becomes two counter-clockwise triangles.
    pub fn height_field(xs: &[f64], ys: &[f64], z: &[f64]) -> Self {
        let nx = xs.len();
        let ny = ys.len();
        assert_eq!(z.len(), nx * ny);
        let mut vertices = Vec::with_capacity(nx * ny);
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                vertices.push([x, y, z[j * nx + i]]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let a = j * nx + i;
                let b = a + 1;
                let c = a + nx + 1;
                let d = a + nx;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        TriMesh { vertices, triangles }
    }

    pub fn transformed(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn z_range(&self) -> (f64, f64) {
        self.vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[2]), hi.max(v[2])))
    }

    /// ASCII mesh text: `v x y z` lines then `f i j k` with 1-based indices.
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 40 + self.triangles.len() * 24);
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.9} {:.9} {:.9}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn from_obj(text: &str) -> Result<Self> {
        let mut mesh = TriMesh::default();
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let bad = || param("mesh", format!("line {}: malformed `{line}`", lineno + 1));
            match it.next() {
                Some("v") => {
                    let mut p = [0.0; 3];
                    for c in &mut p {
                        *c = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
                    }
                    mesh.vertices.push(p);
                }
                Some("f") => {
                    let mut t = [0usize; 3];
                    for c in &mut t {
                        let idx: usize = it
                            .next()
                            .and_then(|s| s.split('/').next())
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(bad)?;
                        if idx == 0 {
                            return Err(bad());
                        }
                        *c = idx - 1;
                    }
                    mesh.triangles.push(t);
                }
                _ => {}
            }
        }
        Ok(mesh)
    }
}

/// Smooth shell over the control grid plus its triangulated sample lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSurface {
    pub control: ControlGrid,
    pub resolution: usize,
    pub mesh: TriMesh,
    spline: BicubicSurface,
}

impl ShellSurface {
    pub fn span_m(&self) -> f64 {
        self.control.span_mm / 1000.0
    }

    /// Height in metres at plan position `(x, y)` in metres.
    pub fn height_at(&self, x_m: f64, y_m: f64) -> f64 {
        self.spline.eval(x_m * 1000.0, y_m * 1000.0) / 1000.0
    }

    /// Height (m) and slope components (dimensionless) at `(x, y)` in metres.
    pub fn height_and_gradient(&self, x_m: f64, y_m: f64) -> (f64, f64, f64) {
        let (z, gx, gy) = self.spline.eval_with_gradient(x_m * 1000.0, y_m * 1000.0);
        (z / 1000.0, gx, gy)
    }

    /// Heights in metres on the tensor lattice `xs × ys` (metres), row-major in `ys`.
    pub fn heights_on(&self, xs_m: &[f64], ys_m: &[f64]) -> Vec<f64> {
        let xs: Vec<f64> = xs_m.iter().map(|x| x * 1000.0).collect();
        let ys: Vec<f64> = ys_m.iter().map(|y| y * 1000.0).collect();
        self.spline.sample_lattice(&xs, &ys).into_iter().map(|z| z / 1000.0).collect()
    }

    /// Same surface with every height multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut control = self.control.clone();
        control.z_mm.iter_mut().for_each(|z| *z *= factor);
        control.amplitude_mm *= factor;
        interpolate_surface(&control, self.resolution)
    }
}

/// Interpolate the control grid and triangulate a `resolution × resolution` sample lattice.
pub fn interpolate_surface(grid: &ControlGrid, resolution: usize) -> Result<ShellSurface> {
    grid.validate()?;
    if resolution < grid.points_per_axis() {
        return Err(param(
            "resolution",
            format!(
                "{resolution} samples per axis cannot resolve {} control points",
                grid.points_per_axis()
            ),
        ));
    }
    let spline = BicubicSurface::new(grid.divisions, grid.span_mm, &grid.z_mm);
    let pts_mm = lattice_points(resolution, grid.span_mm);
    let z_m: Vec<f64> = spline.sample_lattice(&pts_mm, &pts_mm).into_iter().map(|z| z / 1000.0).collect();
    let pts_m: Vec<f64> = pts_mm.iter().map(|p| p / 1000.0).collect();
    let mesh = TriMesh::height_field(&pts_m, &pts_m, &z_m);
    Ok(ShellSurface {
        control: grid.clone(),
        resolution,
        mesh,
        spline,
    })
}

/// 8-bit grayscale raster, row 0 at the top (largest y).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary portable graymap (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Plan-view depth image: `round(255·(1 − z/z_max))`, so the highest sample is
/// black and zero height is white. Heights at or below zero render white.
pub fn depth_map(surface: &ShellSurface, resolution: usize) -> GrayImage {
    let n = resolution.max(2);
    let pts = lattice_points(n, surface.span_m());
    let z = surface.heights_on(&pts, &pts);
    let z_max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pixels = vec![255u8; n * n];
    if z_max > 0.0 {
        for row in 0..n {
            let j = n - 1 - row;
            for col in 0..n {
                let v = 255.0 * (1.0 - z[j * n + col] / z_max);
                pixels[row * n + col] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    GrayImage {
        width: n,
        height: n,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Shape;

    fn rect_envelope() -> FeasibilityEnvelope {
        FeasibilityEnvelope::default_for(Shape::Rectangular)
    }

    #[test]
    fn base_field_examples() {
        assert_eq!(base_field(0.0, 321.0, 25.0, 6.0, 2000.0), 0.0);
        let peak = base_field(2000.0 / 24.0, 0.0, 25.0, 6.0, 2000.0);
        assert!((peak - 25.0).abs() < 1e-12);
        // 25·sin(0.6π)·cos(0.3π)
        let v = base_field(100.0, 50.0, 25.0, 6.0, 2000.0);
        assert!((v - 13.975_424_859_373_687).abs() < 1e-9);
    }

    #[test]
    fn base_field_even_in_y() {
        let (a, f, l) = (20.0, 5.0, 2000.0);
        let period = l / f;
        for k in 0..40 {
            let x = k as f64 * 37.0;
            let y = (k as f64 * 13.0) % period;
            let mirrored = (period - y) % period;
            assert!((base_field(x, y, a, f, l) - base_field(x, mirrored, a, f, l)).abs() < 1e-9);
        }
    }

    #[test]
    fn group_naming() {
        assert_eq!(group_parameters(4), (25.0, 6));
        assert_eq!(group_parameters(5), (30.0, 7));
        assert_eq!(group_parameters(1), (10.0, 3));
    }

    #[test]
    fn zero_amplitude_gives_flat_grid() {
        let grids = generate_iterations(0.0, 3, 1, 9, &rect_envelope(), &GeneratorConfig::default()).unwrap();
        assert_eq!(grids.len(), 1);
        assert!(grids[0].z_mm.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::default();
        let a = generate_iterations(25.0, 6, 5, 42, &rect_envelope(), &cfg).unwrap();
        let b = generate_iterations(25.0, 6, 5, 42, &rect_envelope(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_iterations(25.0, 6, 5, 43, &rect_envelope(), &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_independent_of_thread_count() {
        let cfg = GeneratorConfig::default();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| generate_iterations(20.0, 5, 8, 3, &rect_envelope(), &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn infeasible_pair_rejected() {
        let err = generate_iterations(40.0, 6, 20, 1, &rect_envelope(), &GeneratorConfig::default()).unwrap_err();
        assert!(matches!(err, crate::Error::Envelope { .. }));
        assert!(generate_iterations(25.0, 6, 0, 1, &rect_envelope(), &GeneratorConfig::default()).is_err());
    }

    #[test]
    fn boundary_is_anchored() {
        let grids = generate_iterations(25.0, 6, 3, 42, &rect_envelope(), &GeneratorConfig::default()).unwrap();
        for g in &grids {
            let n = g.points_per_axis();
            for j in 0..n {
                for i in 0..n {
                    if g.is_boundary(i, j) {
                        assert_eq!(g.z(i, j), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn resolution_below_grid_rejected() {
        let grid = ControlGrid::flat(24, 2000.0);
        assert!(interpolate_surface(&grid, 24).is_err());
        assert!(interpolate_surface(&grid, 25).is_ok());
    }

    #[test]
    fn flat_grid_gives_planar_mesh() {
        let s = interpolate_surface(&ControlGrid::flat(6, 2000.0), 64).unwrap();
        assert_eq!(s.mesh.vertices.len(), 64 * 64);
        assert_eq!(s.mesh.triangles.len(), 2 * 63 * 63);
        assert!(s.mesh.vertices.iter().all(|v| v[2] == 0.0));
        let (x0, x1) = s
            .mesh
            .vertices
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v[0]), b.max(v[0])));
        assert_eq!((x0, x1), (0.0, 2.0));
    }

    #[test]
    fn raised_interior_point_is_the_maximum() {
        // 7 divisions so that control sites coincide with 64-sample lattice points
        let mut grid = ControlGrid::flat(7, 2000.0);
        let (ci, cj) = (3, 4);
        grid.z_mm[cj * 8 + ci] = 120.0;
        let s = interpolate_surface(&grid, 64).unwrap();
        let (idx, zmax) = s
            .mesh
            .vertices
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, v)| if v[2] > best.1 { (k, v[2]) } else { best });
        assert!((zmax - 0.120).abs() < 1e-6);
        let v = s.mesh.vertices[idx];
        assert!((v[0] - ci as f64 * 2.0 / 7.0).abs() < 1e-9);
        assert!((v[1] - cj as f64 * 2.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn dense_grid_reproduces_analytic_field() {
        // F = 8f control divisions; compare mesh heights against direct evaluation
        let grid = ControlGrid::from_base_field(25.0, 6, 48, 2000.0);
        let s = interpolate_surface(&grid, 64).unwrap();
        let max_dev = s
            .mesh
            .vertices
            .iter()
            .map(|v| (v[2] * 1000.0 - base_field(v[0] * 1000.0, v[1] * 1000.0, 25.0, 6.0, 2000.0)).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 0.5, "max deviation {max_dev} mm");
    }

    #[test]
    fn depth_map_conventions() {
        let flat = interpolate_surface(&ControlGrid::flat(4, 2000.0), 16).unwrap();
        assert!(depth_map(&flat, 32).pixels.iter().all(|&p| p == 255));

        let grids = generate_iterations(25.0, 6, 1, 42, &rect_envelope(), &GeneratorConfig::default()).unwrap();
        let s = interpolate_surface(&grids[0], 64).unwrap();
        let img = depth_map(&s, 48);
        assert_eq!(img.pixels.iter().copied().min(), Some(0));
        let doubled = s.scaled(2.0).unwrap();
        assert_eq!(depth_map(&doubled, 48), img);

        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n48 48\n255\n"));
        assert_eq!(pgm.len(), b"P5\n48 48\n255\n".len() + 48 * 48);
    }

    #[test]
    fn obj_round_trip() {
        let s = interpolate_surface(&ControlGrid::from_base_field(10.0, 3, 12, 2000.0), 16).unwrap();
        let back = TriMesh::from_obj(&s.mesh.to_obj()).unwrap();
        assert_eq!(back.triangles, s.mesh.triangles);
        for (a, b) in back.vertices.iter().zip(&s.mesh.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-8);
            }
        }
    }
}
