//! Linear-elastic 3D frame analysis.
//!
//! Two-node Euler-Bernoulli beam elements (12 DOF) and axial-only truss
//! elements are assembled into a banded symmetric stiffness matrix, reduced
//! by the support constraints and factorised with a banded Cholesky
//! decomposition. A non-positive pivot is reported as a mechanism.
//!
//! Node DOF order is `ux, uy, uz, rx, ry, rz`. Lengths are in metres, forces
//! in newtons.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::filter::measure;
use crate::loads::{self, deflection_limit_mm, LoadCase, StructureSpec};
use crate::shell3d::ShellSurface;

pub const DOF_PER_NODE: usize = 6;
/// Default lattice cells per axis for shell analysis.
pub const DEFAULT_LATTICE: usize = 20;
pub const DEFAULT_PRECOMPRESSION_N: f64 = 1.0;
const DOF_NAMES: [&str; 6] = ["ux", "uy", "uz", "rx", "ry", "rz"];
/// Pivots below this fraction of the original diagonal are treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-10;

type Mat12 = SMatrix<f64, 12, 12>;
type Vec12 = SVector<f64, 12>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub elastic_modulus_pa: f64,
    pub shear_modulus_pa: f64,
}

impl Default for Material {
    /// rPET-like defaults: E = 2.1 GPa, G = 0.78 GPa.
    fn default() -> Self {
        Material {
            elastic_modulus_pa: 2.1e9,
            shear_modulus_pa: 0.78e9,
        }
    }
}

/// Cross-section constants. `iy` governs bending in the local x–z plane
/// (out of the shell surface), `iz` bending in the local x–y plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub area_m2: f64,
    pub iy_m4: f64,
    pub iz_m4: f64,
    pub torsion_m4: f64,
}

impl Section {
    /// Solid rectangle `width × depth`, depth measured along local z.
    pub fn rectangle(width: f64, depth: f64) -> Self {
        let (long, short) = if width >= depth { (width, depth) } else { (depth, width) };
        // Saint-Venant torsion constant, thin-rectangle series truncated after the first correction
        let torsion = long * short.powi(3) * (1.0 / 3.0 - 0.21 * short / long * (1.0 - short.powi(4) / (12.0 * long.powi(4))));
        Section {
            area_m2: width * depth,
            iy_m4: width * depth.powi(3) / 12.0,
            iz_m4: depth * width.powi(3) / 12.0,
            torsion_m4: torsion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Beam,
    /// Pin-ended bar carrying axial force only.
    Truss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub nodes: [usize; 2],
    pub section: Section,
    pub kind: ElementKind,
}

/// Constrained DOFs at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// All six DOFs.
    Fixed,
    /// The three translations.
    Pinned,
    /// Vertical translation only; free to slide horizontally.
    SlidingBase,
    /// Explicit mask in `ux, uy, uz, rx, ry, rz` order.
    Custom([bool; 6]),
}

impl Support {
    pub fn mask(self) -> [bool; 6] {
        match self {
            Support::Fixed => [true; 6],
            Support::Pinned => [true, true, true, false, false, false],
            Support::SlidingBase => [false, false, true, false, false, false],
            Support::Custom(m) => m,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(Support::Fixed),
            "pinned" | "pin" => Ok(Support::Pinned),
            "sliding" | "slidingbase" | "sliding_base" => Ok(Support::SlidingBase),
            other => Err(param("support", format!("unknown support kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameModel {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<Element>,
    pub supports: BTreeMap<usize, Support>,
    pub material: Material,
}

impl FrameModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (k, e) in self.elements.iter().enumerate() {
            let [a, b] = e.nodes;
            if a >= n || b >= n {
                return Err(param("elements", format!("element {k} references a missing node")));
            }
            if a == b {
                return Err(param("elements", format!("element {k} connects node {a} to itself")));
            }
            if element_length(&self.nodes[a], &self.nodes[b]) <= 0.0 {
                return Err(Error::Geometry(format!("element {k} has zero length")));
            }
            let s = &e.section;
            if !(s.area_m2 > 0.0) || (e.kind == ElementKind::Beam && !(s.iy_m4 > 0.0 && s.iz_m4 > 0.0 && s.torsion_m4 > 0.0)) {
                return Err(param("section", format!("element {k} has a non-positive section constant")));
            }
        }
        if let Some(&bad) = self.supports.keys().find(|&&i| i >= n) {
            return Err(param("supports", format!("support at missing node {bad}")));
        }
        if !(self.material.elastic_modulus_pa > 0.0 && self.material.shear_modulus_pa > 0.0) {
            return Err(param("material", "moduli must be > 0"));
        }
        Ok(())
    }

    pub fn dof_count(&self) -> usize {
        self.nodes.len() * DOF_PER_NODE
    }
}

fn element_length(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (Vector3::from(*b) - Vector3::from(*a)).norm()
}

/// Rows are the local x, y, z axes in global coordinates. Local z is the
/// component of global Z orthogonal to the member (global X for vertical members).
fn local_axes(a: &[f64; 3], b: &[f64; 3]) -> (Matrix3<f64>, f64) {
    let d = Vector3::from(*b) - Vector3::from(*a);
    let len = d.norm();
    let ex = d / len;
    let up = Vector3::z();
    let reference = if ex.cross(&up).norm() < 1e-6 { Vector3::x() } else { up };
    let ez = (reference - ex * ex.dot(&reference)).normalize();
    let ey = ez.cross(&ex);
    (Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()]), len)
}

fn local_stiffness(e: &Element, len: f64, mat: &Material) -> Mat12 {
    let mut k = Mat12::zeros();
    let ea = mat.elastic_modulus_pa * e.section.area_m2 / len;
    k[(0, 0)] = ea;
    k[(6, 6)] = ea;
    k[(0, 6)] = -ea;
    k[(6, 0)] = -ea;
    if e.kind == ElementKind::Truss {
        return k;
    }
    let l2 = len * len;
    let l3 = l2 * len;
    let gj = mat.shear_modulus_pa * e.section.torsion_m4 / len;
    k[(3, 3)] = gj;
    k[(9, 9)] = gj;
    k[(3, 9)] = -gj;
    k[(9, 3)] = -gj;

    // bending in x–y: v (1, 7), θz (5, 11)
    let eiz = mat.elastic_modulus_pa * e.section.iz_m4;
    let (a, b, c, d) = (12.0 * eiz / l3, 6.0 * eiz / l2, 4.0 * eiz / len, 2.0 * eiz / len);
    let xy = [
        (1, 1, a), (1, 5, b), (1, 7, -a), (1, 11, b),
        (5, 5, c), (5, 7, -b), (5, 11, d),
        (7, 7, a), (7, 11, -b),
        (11, 11, c),
    ];
    // bending in x–z: w (2, 8), θy (4, 10); θy = −dw/dx flips the coupling signs
    let eiy = mat.elastic_modulus_pa * e.section.iy_m4;
    let (a, b, c, d) = (12.0 * eiy / l3, 6.0 * eiy / l2, 4.0 * eiy / len, 2.0 * eiy / len);
    let xz = [
        (2, 2, a), (2, 4, -b), (2, 8, -a), (2, 10, -b),
        (4, 4, c), (4, 8, b), (4, 10, d),
        (8, 8, a), (8, 10, b),
        (10, 10, c),
    ];
    for (i, j, v) in xy.into_iter().chain(xz) {
        k[(i, j)] = v;
        k[(j, i)] = v;
    }
    k
}

/// Element stiffness in global coordinates.
pub fn element_stiffness(model: &FrameModel, e: &Element) -> Mat12 {
    let (r, len) = local_axes(&model.nodes[e.nodes[0]], &model.nodes[e.nodes[1]]);
    let mut t = Mat12::zeros();
    for blk in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(&r);
    }
    t.transpose() * local_stiffness(e, len, &model.material) * t
}

fn dof_label(dof: usize) -> String {
    format!("node {} {}", dof / DOF_PER_NODE, DOF_NAMES[dof % DOF_PER_NODE])
}

/// Symmetric positive definite band matrix, upper band stored row-wise.
#[derive(Debug, Clone)]
struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn new(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= i && j - i <= self.bw);
        i * (self.bw + 1) + (j - i)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place `A = UᵀU`. Returns the indices of rows whose pivot collapsed.
    fn cholesky(&mut self) -> Vec<usize> {
        let (n, bw) = (self.n, self.bw);
        let mut singular = Vec::new();
        for i in 0..n {
            let original = self.data[self.idx(i, i)];
            let k0 = i.saturating_sub(bw);
            let mut diag = original;
            for k in k0..i {
                let u = self.data[self.idx(k, i)];
                diag -= u * u;
            }
            if !(diag > PIVOT_TOLERANCE * original.abs().max(f64::MIN_POSITIVE)) {
                singular.push(i);
                diag = original.abs().max(1.0);
            }
            let piv = diag.sqrt();
            let ii = self.idx(i, i);
            self.data[ii] = piv;
            let jmax = (i + bw).min(n - 1);
            for j in i + 1..=jmax {
                let mut s = self.data[self.idx(i, j)];
                for k in j.saturating_sub(bw).max(k0)..i {
                    s -= self.data[self.idx(k, i)] * self.data[self.idx(k, j)];
                }
                let ij = self.idx(i, j);
                self.data[ij] = s / piv;
            }
        }
        singular
    }

    fn solve(&self, rhs: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        // Uᵀ y = b
        for i in 0..n {
            let mut s = rhs[i];
            for (k, r) in rhs.iter().enumerate().take(i).skip(i.saturating_sub(bw)) {
                s -= self.data[self.idx(k, i)] * r;
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
        // U x = y
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for (j, r) in rhs.iter().enumerate().take((i + bw).min(n - 1) + 1).skip(i + 1) {
                s -= self.data[self.idx(i, j)] * r;
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
    }
}

/// Displacements and support reactions of a linear solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    /// Per node: three translations (m) and three rotations (rad).
    pub displacements: Vec<[f64; 6]>,
    /// Largest nodal translation magnitude, mm.
    pub max_translation_mm: f64,
    pub max_translation_node: usize,
    /// Per supported node: forces (kN) and moments (kN·m).
    pub reactions_kn: BTreeMap<usize, [f64; 6]>,
    /// Sum of applied nodal forces, kN.
    pub applied_kn: [f64; 3],
}

impl SolveResult {
    pub fn reaction_sum_kn(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for r in self.reactions_kn.values() {
            for k in 0..3 {
                s[k] += r[k];
            }
        }
        s
    }

    /// Largest `|ΣR + ΣF|` over the three axes relative to the applied load magnitude.
    pub fn equilibrium_residual(&self) -> f64 {
        let r = self.reaction_sum_kn();
        let scale = self.applied_kn.iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale == 0.0 {
            return r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        }
        (0..3).map(|k| (r[k] + self.applied_kn[k]).abs()).fold(0.0, f64::max) / scale
    }
}

/// Solve `K·u = F` with the supports' DOFs held at zero.
///
/// `nodal_loads[i]` holds forces (N) and moments (N·m) at node `i`.
pub fn solve(model: &FrameModel, nodal_loads: &[[f64; 6]]) -> Result<SolveResult> {
    model.validate()?;
    if nodal_loads.len() != model.nodes.len() {
        return Err(param(
            "nodal_loads",
            format!("expected {} load vectors, got {}", model.nodes.len(), nodal_loads.len()),
        ));
    }
    let ndof = model.dof_count();

    // rotations of nodes touched only by trusses carry no stiffness and are dropped
    let mut has_beam = vec![false; model.nodes.len()];
    let mut has_element = vec![false; model.nodes.len()];
    for e in &model.elements {
        for &n in &e.nodes {
            has_element[n] = true;
            has_beam[n] |= e.kind == ElementKind::Beam;
        }
    }
    let mut constrained = vec![false; ndof];
    for (&node, s) in &model.supports {
        for (k, &c) in s.mask().iter().enumerate() {
            constrained[node * DOF_PER_NODE + k] = c;
        }
    }
    let mut equation = vec![usize::MAX; ndof];
    let mut free_dofs = Vec::new();
    for dof in 0..ndof {
        let node = dof / DOF_PER_NODE;
        let rotational = dof % DOF_PER_NODE >= 3;
        let inactive = rotational && has_element[node] && !has_beam[node];
        if !constrained[dof] && !inactive {
            equation[dof] = free_dofs.len();
            free_dofs.push(dof);
        }
    }

    let element_k: Vec<Mat12> = model.elements.iter().map(|e| element_stiffness(model, e)).collect();
    let global_dofs = |e: &Element| -> [usize; 12] {
        let mut g = [0; 12];
        for (h, &n) in e.nodes.iter().enumerate() {
            for k in 0..DOF_PER_NODE {
                g[h * DOF_PER_NODE + k] = n * DOF_PER_NODE + k;
            }
        }
        g
    };

    let mut bw = 0;
    for e in &model.elements {
        let eqs: Vec<usize> = global_dofs(e).iter().map(|&d| equation[d]).filter(|&q| q != usize::MAX).collect();
        if let (Some(lo), Some(hi)) = (eqs.iter().min(), eqs.iter().max()) {
            bw = bw.max(hi - lo);
        }
    }
    let n = free_dofs.len();
    let mut u_full = vec![0.0; ndof];
    if n > 0 {
        let mut k = BandMatrix::new(n, bw);
        for (e, ke) in model.elements.iter().zip(&element_k) {
            let g = global_dofs(e);
            for a in 0..12 {
                let qa = equation[g[a]];
                if qa == usize::MAX {
                    continue;
                }
                for b in a..12 {
                    let qb = equation[g[b]];
                    if qb == usize::MAX {
                        continue;
                    }
                    k.add(qa, qb, ke[(a, b)]);
                }
            }
        }
        let singular = k.cholesky();
        if !singular.is_empty() {
            return Err(Error::Mechanism {
                dofs: singular.iter().map(|&q| dof_label(free_dofs[q])).collect(),
            });
        }
        let mut rhs: Vec<f64> = free_dofs
            .iter()
            .map(|&d| nodal_loads[d / DOF_PER_NODE][d % DOF_PER_NODE])
            .collect();
        k.solve(&mut rhs);
        for (q, &d) in free_dofs.iter().enumerate() {
            u_full[d] = rhs[q];
        }
    }

    // internal nodal forces K·u, element by element
    let mut internal = vec![0.0; ndof];
    for (e, ke) in model.elements.iter().zip(&element_k) {
        let g = global_dofs(e);
        let ue = Vec12::from_iterator(g.iter().map(|&d| u_full[d]));
        let fe = ke * ue;
        for a in 0..12 {
            internal[g[a]] += fe[a];
        }
    }

    let mut reactions_kn = BTreeMap::new();
    for (&node, s) in &model.supports {
        let mut r = [0.0; 6];
        for (k, &c) in s.mask().iter().enumerate() {
            if c {
                let d = node * DOF_PER_NODE + k;
                r[k] = (internal[d] - nodal_loads[node][k]) / 1000.0;
            }
        }
        reactions_kn.insert(node, r);
    }

    let displacements: Vec<[f64; 6]> = (0..model.nodes.len())
        .map(|i| {
            let mut d = [0.0; 6];
            d.copy_from_slice(&u_full[i * DOF_PER_NODE..(i + 1) * DOF_PER_NODE]);
            d
        })
        .collect();
    let (max_translation_node, max_t) = displacements
        .iter()
        .map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
        .enumerate()
        .fold((0, 0.0), |best, (i, t)| if t > best.1 { (i, t) } else { best });
    let mut applied_kn = [0.0; 3];
    for l in nodal_loads {
        for k in 0..3 {
            applied_kn[k] += l[k] / 1000.0;
        }
    }
    Ok(SolveResult {
        displacements,
        max_translation_mm: max_t * 1000.0,
        max_translation_node,
        reactions_kn,
        applied_kn,
    })
}

/// Homogenised section of a lattice member: a rectangle of width
/// `solid_fraction × tributary width` and depth equal to the sheet thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionModel {
    pub solid_fraction: f64,
    pub thickness_m: f64,
}

impl Default for SectionModel {
    fn default() -> Self {
        SectionModel {
            solid_fraction: 0.08,
            thickness_m: 0.08,
        }
    }
}

impl SectionModel {
    pub fn for_tributary_width(&self, width_m: f64) -> Section {
        Section::rectangle(self.solid_fraction * width_m, self.thickness_m)
    }
}

/// Where the shell is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SupportLayout {
    /// The four plan corners.
    Corners(Support),
    /// Every lattice node on the plan boundary.
    Boundary(Support),
    /// Explicit plan positions (m), snapped to the nearest lattice node.
    Points(Vec<([f64; 2], Support)>),
}

impl Default for SupportLayout {
    fn default() -> Self {
        SupportLayout::Boundary(Support::Fixed)
    }
}

/// Regular plan lattice sampled from a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellFrame {
    pub model: FrameModel,
    /// Cells per axis.
    pub grid: usize,
    pub spacing_m: f64,
}

impl ShellFrame {
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.grid + 1) + i
    }

    /// Lattice node closest to plan position `(x, y)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let snap = |v: f64| ((v / self.spacing_m).round().max(0.0) as usize).min(self.grid);
        self.node_index(snap(x), snap(y))
    }

    /// Tributary plan area of every node, m². Sums to the plan area.
    pub fn tributary_areas(&self) -> Vec<f64> {
        let n = self.grid + 1;
        let w = |i: usize| if i == 0 || i == self.grid { 0.5 } else { 1.0 };
        let h2 = self.spacing_m * self.spacing_m;
        (0..n * n).map(|k| w(k % n) * w(k / n) * h2).collect()
    }
}

/// Sample `surface` on a `grid × grid` cell lattice and build a frame with
/// members along rows, columns and one diagonal per cell.
pub fn frame_from_surface(
    surface: &ShellSurface,
    grid: usize,
    section: &SectionModel,
    material: Material,
    supports: &SupportLayout,
) -> Result<ShellFrame> {
    if grid < 2 {
        return Err(param("grid", format!("lattice needs at least 2 cells per axis, got {grid}")));
    }
    if !(section.solid_fraction > 0.0 && section.thickness_m > 0.0) {
        return Err(param("section", "solid fraction and thickness must be > 0"));
    }
    let span = surface.span_m();
    let h = span / grid as f64;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Geometry("surface has zero plan extent".into()));
    }
    let n = grid + 1;
    let pts: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let z = surface.heights_on(&pts, &pts);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Geometry("surface heights are not finite".into()));
    }
    let nodes: Vec<[f64; 3]> = (0..n * n).map(|k| [pts[k % n], pts[k / n], z[k]]).collect();

    let interior = section.for_tributary_width(h);
    let edge = section.for_tributary_width(0.5 * h);
    let mut elements = Vec::with_capacity(3 * grid * grid + 2 * grid);
    let idx = |i: usize, j: usize| j * n + i;
    for j in 0..n {
        for i in 0..grid {
            let s = if j == 0 || j == grid { edge } else { interior };
            elements.push(Element { nodes: [idx(i, j), idx(i + 1, j)], section: s, kind: ElementKind::Beam });
        }
    }
    for i in 0..n {
        for j in 0..grid {
            let s = if i == 0 || i == grid { edge } else { interior };
            elements.push(Element { nodes: [idx(i, j), idx(i, j + 1)], section: s, kind: ElementKind::Beam });
        }
    }
    for j in 0..grid {
        for i in 0..grid {
            elements.push(Element { nodes: [idx(i, j), idx(i + 1, j + 1)], section: edge, kind: ElementKind::Beam });
        }
    }

    let mut frame = ShellFrame {
        model: FrameModel {
            nodes,
            elements,
            supports: BTreeMap::new(),
            material,
        },
        grid,
        spacing_m: h,
    };
    let mut supported = BTreeMap::new();
    match supports {
        SupportLayout::Corners(s) => {
            for (i, j) in [(0, 0), (grid, 0), (grid, grid), (0, grid)] {
                supported.insert(idx(i, j), *s);
            }
        }
        SupportLayout::Boundary(s) => {
            for j in 0..n {
                for i in 0..n {
                    if i == 0 || j == 0 || i == grid || j == grid {
                        supported.insert(idx(i, j), *s);
                    }
                }
            }
        }
        SupportLayout::Points(points) => {
            for (p, s) in points {
                supported.insert(frame.nearest_node(p[0], p[1]), *s);
            }
        }
    }
    frame.model.supports = supported;
    Ok(frame)
}

/// Outcome of a shell analysis against the span deflection limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellAnalysis {
    pub result: SolveResult,
    pub load_case: LoadCase,
    pub max_displacement_mm: f64,
    pub deflection_limit_mm: f64,
    pub passes: bool,
}

/// Nodal loads for a shell: the total load downward by tributary plan area,
/// plus the membrane pre-compression along the inward (downward) surface normal.
pub fn shell_nodal_loads(frame: &ShellFrame, surface: &ShellSurface, load_case: &LoadCase, precompression_n: f64) -> Vec<[f64; 6]> {
    let trib = frame.tributary_areas();
    let plan: f64 = trib.iter().sum();
    let total_n = load_case.total_kn * 1000.0;
    frame
        .model
        .nodes
        .iter()
        .zip(&trib)
        .map(|(p, &a)| {
            let share = a / plan;
            let (_, gx, gy) = surface.height_and_gradient(p[0], p[1]);
            let norm = (gx * gx + gy * gy + 1.0).sqrt();
            let pc = precompression_n * share / norm;
            [pc * gx, pc * gy, -total_n * share - pc, 0.0, 0.0, 0.0]
        })
        .collect()
}

/// Distribute the load case over the lattice, solve, and check the span limit.
pub fn analyze_shell(
    surface: &ShellSurface,
    grid: usize,
    section: &SectionModel,
    material: Material,
    supports: &SupportLayout,
    load_case: &LoadCase,
    precompression_n: f64,
) -> Result<ShellAnalysis> {
    let frame = frame_from_surface(surface, grid, section, material, supports)?;
    if frame.model.supports.len() < 3 {
        return Err(param("supports", "a shell needs at least three supported nodes"));
    }
    let loads = shell_nodal_loads(&frame, surface, load_case, precompression_n);
    let result = solve(&frame.model, &loads)?;
    let limit = deflection_limit_mm(surface.span_m())?;
    Ok(ShellAnalysis {
        max_displacement_mm: result.max_translation_mm,
        deflection_limit_mm: limit,
        passes: result.max_translation_mm <= limit,
        result,
        load_case: *load_case,
    })
}

/// Everything needed to analyse a shell surface under the design loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub structure: StructureSpec,
    pub snow_shape_factor: f64,
    pub wind_shape_factor: f64,
    pub material: Material,
    pub lattice: usize,
    pub supports: SupportLayout,
    pub precompression_n: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            structure: StructureSpec::default(),
            snow_shape_factor: loads::DEFAULT_SNOW_SHAPE_FACTOR,
            wind_shape_factor: loads::DEFAULT_WIND_SHAPE_FACTOR,
            material: Material::default(),
            lattice: DEFAULT_LATTICE,
            supports: SupportLayout::default(),
            precompression_n: DEFAULT_PRECOMPRESSION_N,
        }
    }
}

impl AnalysisSettings {
    pub fn validate(&self) -> Result<()> {
        self.structure.validate()?;
        if self.lattice < 2 {
            return Err(param("lattice", "must be >= 2"));
        }
        if !(self.precompression_n >= 0.0 && self.precompression_n.is_finite()) {
            return Err(param("precompression_n", "must be >= 0"));
        }
        if !(self.material.elastic_modulus_pa > 0.0 && self.material.shear_modulus_pa > 0.0) {
            return Err(param("material", "moduli must be > 0"));
        }
        // surfaces the factor range checks
        self.load_case(self.structure.plan_area_m2).map(|_| ())
    }

    /// Homogenised lattice section from the sheet's solid fraction and thickness.
    pub fn section(&self) -> SectionModel {
        SectionModel {
            solid_fraction: self.structure.solid_fraction,
            thickness_m: self.structure.thickness_m,
        }
    }

    pub fn load_case(&self, surface_area_m2: f64) -> Result<LoadCase> {
        loads::load_case(&self.structure, surface_area_m2, self.snow_shape_factor, self.wind_shape_factor)
    }

    /// Measure the surface, build its load case and run [`analyze_shell`].
    pub fn analyze(&self, surface: &ShellSurface) -> Result<ShellAnalysis> {
        let area = measure(surface)?.area_m2;
        let lc = self.load_case(area)?;
        analyze_shell(surface, self.lattice, &self.section(), self.material, &self.supports, &lc, self.precompression_n)
    }
}
