//! Perimeter/area measurement and selection of mutually distinct shells.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::shell3d::{ShellSurface, TriMesh};

pub const DEFAULT_KEEP: usize = 4;
/// First-pass tolerance as a fraction of the pool median.
pub const AUTO_TOLERANCE_FRACTION: f64 = 0.02;
pub const AUTO_TOLERANCE_MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetrics {
    /// Length of the 3D boundary loop, m.
    pub perimeter_m: f64,
    /// Sum of triangle areas, m².
    pub area_m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub perimeter_m: f64,
    pub area_m2: f64,
}

impl Tolerance {
    pub fn zero() -> Self {
        Tolerance {
            perimeter_m: 0.0,
            area_m2: 0.0,
        }
    }
}

/// `|P1 − P2| > ΔP or |a1 − a2| > Δa`.
pub fn is_distinct(a: &SurfaceMetrics, b: &SurfaceMetrics, tol: &Tolerance) -> bool {
    (a.perimeter_m - b.perimeter_m).abs() > tol.perimeter_m || (a.area_m2 - b.area_m2).abs() > tol.area_m2
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

fn triangle_area(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> f64 {
    let u = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let v = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Perimeter and area of a manifold mesh with a single boundary loop.
pub fn measure_mesh(mesh: &TriMesh) -> Result<SurfaceMetrics> {
    if mesh.triangles.is_empty() {
        return Err(Error::Geometry("mesh has no triangles".into()));
    }
    let nv = mesh.vertices.len();
    let mut edges: HashMap<(usize, usize), u32> = HashMap::with_capacity(mesh.triangles.len() * 2);
    let mut area = 0.0;
    for t in &mesh.triangles {
        if t.iter().any(|&i| i >= nv) {
            return Err(Error::Geometry(format!("triangle {t:?} references a missing vertex")));
        }
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::Geometry(format!("degenerate triangle {t:?}")));
        }
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
        area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    }

    let mut boundary: Vec<(usize, usize)> = Vec::new();
    for (&e, &count) in &edges {
        match count {
            1 => boundary.push(e),
            2 => {}
            _ => return Err(Error::Geometry(format!("edge {e:?} is shared by {count} triangles"))),
        }
    }
    boundary.sort_unstable();
    if boundary.is_empty() {
        return Err(Error::Geometry("mesh is closed; a height field needs a boundary".into()));
    }

    // the boundary must be one simple closed loop
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in &boundary {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    if let Some((v, n)) = adjacency.iter().find(|(_, n)| n.len() != 2) {
        return Err(Error::Geometry(format!(
            "boundary vertex {v} has {} boundary edges; the mesh is open or non-manifold",
            n.len()
        )));
    }
    let start = boundary.iter().map(|e| e.0).min().unwrap_or(0);
    let (mut prev, mut cur) = (start, adjacency[&start][0]);
    let mut perimeter = dist(mesh.vertices[prev], mesh.vertices[cur]);
    let mut steps = 1;
    while cur != start {
        let nbrs = &adjacency[&cur];
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        perimeter += dist(mesh.vertices[cur], mesh.vertices[next]);
        prev = cur;
        cur = next;
        steps += 1;
        if steps > boundary.len() {
            break;
        }
    }
    if steps != boundary.len() {
        return Err(Error::Geometry(format!(
            "boundary splits into several loops ({steps} of {} edges in the first)",
            boundary.len()
        )));
    }
    Ok(SurfaceMetrics {
        perimeter_m: perimeter,
        area_m2: area,
    })
}

pub fn measure(surface: &ShellSurface) -> Result<SurfaceMetrics> {
    measure_mesh(&surface.mesh)
}

pub fn measure_all(surfaces: &[ShellSurface]) -> Result<Vec<SurfaceMetrics>> {
    surfaces.par_iter().map(measure).collect()
}

/// Result of a greedy selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// Indices into the input, in input order.
    pub kept: Vec<usize>,
    pub tolerance: Tolerance,
    pub requested: usize,
    /// Number of tolerance halvings applied by [`auto_select`].
    pub halvings: u32,
}

impl Selection {
    pub fn is_complete(&self) -> bool {
        self.kept.len() >= self.requested
    }
}

/// Greedy scan in input order: keep a candidate iff it is distinct from every
/// already-kept one; stop after `k`.
pub fn select_distinct(metrics: &[SurfaceMetrics], tol: Tolerance, k: usize) -> Result<Selection> {
    if metrics.is_empty() {
        return Err(param("surfaces", "selection needs at least one candidate"));
    }
    if !(tol.perimeter_m >= 0.0 && tol.area_m2 >= 0.0) {
        return Err(param("tolerance", "tolerances must be >= 0"));
    }
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    for (i, m) in metrics.iter().enumerate() {
        if kept.len() >= k {
            break;
        }
        if kept.iter().all(|&j| is_distinct(m, &metrics[j], &tol)) {
            kept.push(i);
        }
    }
    Ok(Selection {
        kept,
        tolerance: tol,
        requested: k,
        halvings: 0,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// First-pass tolerances: 2% of the median perimeter and of the median area.
pub fn auto_tolerance(metrics: &[SurfaceMetrics]) -> Result<Tolerance> {
    if metrics.len() < 2 {
        return Err(param("surfaces", "automatic tolerance needs at least two candidates"));
    }
    Ok(Tolerance {
        perimeter_m: AUTO_TOLERANCE_FRACTION * median(metrics.iter().map(|m| m.perimeter_m).collect()),
        area_m2: AUTO_TOLERANCE_FRACTION * median(metrics.iter().map(|m| m.area_m2).collect()),
    })
}

/// Select with [`auto_tolerance`], halving both tolerances (at most ten
/// times) while fewer than `k` survive.
pub fn auto_select(metrics: &[SurfaceMetrics], k: usize) -> Result<Selection> {
    let mut tol = auto_tolerance(metrics)?;
    let mut selection = select_distinct(metrics, tol, k)?;
    let mut halvings = 0;
    while selection.kept.len() < k && halvings < AUTO_TOLERANCE_MAX_HALVINGS {
        tol.perimeter_m *= 0.5;
        tol.area_m2 *= 0.5;
        halvings += 1;
        selection = select_distinct(metrics, tol, k)?;
    }
    selection.halvings = halvings;
    Ok(selection)
}
