//! Deployable shelter optimisation.
//!
//! For every anchor layout a batch of seeded canopy surfaces is generated,
//! gated by drainage, measured (CMS, UA, LC, FC, S), graded 1–100 within the
//! surviving cohort and ranked by a weighted score. Formwork columns are
//! thinned greedily while the column-supported surface keeps its perimeter and
//! area, and the winner is checked against the span deflection limit.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fem::{
    frame_from_surface, shell_nodal_loads, solve, AnalysisSettings, ShellAnalysis, Support, SupportLayout,
};
use crate::filter::{measure, measure_mesh, SurfaceMetrics, Tolerance};
use crate::rng::{derive_seed, KeyedStream};
use crate::shell3d::{interpolate_surface, ControlGrid, ShellSurface, TriMesh};
use crate::spline::lattice_points;

/// Column positions along each plan axis, metres.
pub const COLUMN_POSITIONS_M: [f64; 4] = [0.25, 0.75, 1.25, 1.75];
pub const SLOPE_GRID_POINTS: usize = 10;
pub const USABLE_AREA_RASTER: usize = 100;
/// Samples per axis when meshing the column-supported surface.
const SUPPORT_FIT_SAMPLES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnchorKind {
    One,
    TwoSide,
    TwoDiagonal,
    Three,
    Four,
}

impl AnchorKind {
    pub const ALL: [AnchorKind; 5] = [
        AnchorKind::One,
        AnchorKind::TwoSide,
        AnchorKind::TwoDiagonal,
        AnchorKind::Three,
        AnchorKind::Four,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnchorKind::One => "one",
            AnchorKind::TwoSide => "two-side",
            AnchorKind::TwoDiagonal => "two-diagonal",
            AnchorKind::Three => "three",
            AnchorKind::Four => "four",
        }
    }

    /// Corner indices, counter-clockwise from the origin.
    fn corners(self) -> &'static [usize] {
        match self {
            AnchorKind::One => &[0],
            AnchorKind::TwoSide => &[0, 1],
            AnchorKind::TwoDiagonal => &[0, 2],
            AnchorKind::Three => &[0, 1, 2],
            AnchorKind::Four => &[0, 1, 2, 3],
        }
    }

    pub fn anchor_count(self) -> usize {
        self.corners().len()
    }
}

impl fmt::Display for AnchorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnchorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        AnchorKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| param("anchor_kind", format!("unknown anchor configuration `{s}`")))
    }
}

/// Ground-level pin points on the base square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub kind: AnchorKind,
    pub points: Vec<[f64; 2]>,
}

impl AnchorConfig {
    pub fn new(kind: AnchorKind, span_m: f64) -> Self {
        let corners = [[0.0, 0.0], [span_m, 0.0], [span_m, span_m], [0.0, span_m]];
        AnchorConfig {
            kind,
            points: kind.corners().iter().map(|&c| corners[c]).collect(),
        }
    }

    pub fn validate(&self, span_m: f64) -> Result<()> {
        if self.points.len() != self.kind.anchor_count() {
            return Err(param(
                "anchors",
                format!("{} expects {} anchors, got {}", self.kind, self.kind.anchor_count(), self.points.len()),
            ));
        }
        let eps = 1e-9 * span_m;
        for p in &self.points {
            let inside = (0.0..=span_m).contains(&p[0]) && (0.0..=span_m).contains(&p[1]);
            let on_edge = p.iter().any(|&c| c.abs() <= eps || (c - span_m).abs() <= eps);
            if !(inside && on_edge) {
                return Err(param("anchors", format!("anchor ({}, {}) is not on the base boundary", p[0], p[1])));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnRole {
    /// Permanent; fixed at the base.
    LoadBearing,
    /// Temporary shaping support; pinned.
    Formwork,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub position_m: [f64; 2],
    /// Surface height above the column, m.
    pub height_m: f64,
    pub section_area_m2: f64,
    pub role: ColumnRole,
}

impl Column {
    pub fn volume_m3(&self) -> f64 {
        self.section_area_m2 * self.height_m.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    /// Side of the square column section, m.
    pub section_side_m: f64,
    /// Columns farther than this from every anchor are load-bearing.
    pub load_bearing_clearance_m: f64,
}

impl Default for ColumnConfig {
    fn default() -> Self {
        ColumnConfig {
            section_side_m: 0.05,
            load_bearing_clearance_m: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSet {
    pub load_bearing: Vec<Column>,
    pub formwork: Vec<Column>,
}

impl ColumnSet {
    /// The 4×4 layout at 0.5 m spacing, heights taken from the surface.
    pub fn initial(surface: &ShellSurface, anchors: &AnchorConfig, cfg: &ColumnConfig) -> Self {
        let scale = surface.span_m() / 2.0;
        let pos: Vec<f64> = COLUMN_POSITIONS_M.iter().map(|p| p * scale).collect();
        let heights = surface.heights_on(&pos, &pos);
        let mut set = ColumnSet {
            load_bearing: Vec::new(),
            formwork: Vec::new(),
        };
        for (k, &height_m) in heights.iter().enumerate() {
            let p = [pos[k % 4], pos[k / 4]];
            let clearance = anchors
                .points
                .iter()
                .map(|a| ((a[0] - p[0]).powi(2) + (a[1] - p[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            let role = if clearance > cfg.load_bearing_clearance_m {
                ColumnRole::LoadBearing
            } else {
                ColumnRole::Formwork
            };
            let column = Column {
                position_m: p,
                height_m,
                section_area_m2: cfg.section_side_m * cfg.section_side_m,
                role,
            };
            match role {
                ColumnRole::LoadBearing => set.load_bearing.push(column),
                ColumnRole::Formwork => set.formwork.push(column),
            }
        }
        set
    }

    pub fn count(&self) -> usize {
        self.load_bearing.len() + self.formwork.len()
    }

    pub fn all(&self) -> impl Iterator<Item = &Column> {
        self.load_bearing.iter().chain(&self.formwork)
    }

    pub fn load_bearing_volume_m3(&self) -> f64 {
        total_volume(&self.load_bearing)
    }

    pub fn formwork_volume_m3(&self) -> f64 {
        total_volume(&self.formwork)
    }
}

fn total_volume(columns: &[Column]) -> f64 {
    // an empty f64 sum is -0.0
    columns.iter().fold(0.0, |acc, c| acc + c.volume_m3())
}

/// Which points count as ponding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrainageRule {
    /// A point fails iff no neighbour slope reaches the threshold.
    Ponding,
    /// A point fails iff any neighbour slope is below the threshold.
    Strict,
}

impl FromStr for DrainageRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ponding" => Ok(DrainageRule::Ponding),
            "strict" => Ok(DrainageRule::Strict),
            other => Err(param("drainage_rule", format!("expected `ponding` or `strict`, got `{other}`"))),
        }
    }
}

/// Slopes on the 10×10 drainage lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub points_per_axis: usize,
    pub spacing_m: f64,
    /// Row-major heights, m.
    pub heights_m: Vec<f64>,
    /// Steepest and gentlest 4-neighbour slope at each point.
    pub max_slope: Vec<f64>,
    pub min_slope: Vec<f64>,
    /// Plan positions of failing points.
    pub failing: Vec<[f64; 2]>,
    pub passes: bool,
}

impl SlopeReport {
    /// Drainage slope of the worst-drained point.
    pub fn min_drainage_slope(&self) -> f64 {
        self.max_slope.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn slope_grid(surface: &ShellSurface, threshold: f64, rule: DrainageRule) -> SlopeReport {
    let n = SLOPE_GRID_POINTS;
    let pts = lattice_points(n, surface.span_m());
    let spacing = pts[1] - pts[0];
    let heights = surface.heights_on(&pts, &pts);
    let mut max_slope = vec![0.0; n * n];
    let mut min_slope = vec![f64::INFINITY; n * n];
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let mut neighbours = Vec::with_capacity(4);
            if i > 0 {
                neighbours.push(k - 1);
            }
            if i + 1 < n {
                neighbours.push(k + 1);
            }
            if j > 0 {
                neighbours.push(k - n);
            }
            if j + 1 < n {
                neighbours.push(k + n);
            }
            for m in neighbours {
                let s = (heights[m] - heights[k]).abs() / spacing;
                max_slope[k] = f64::max(max_slope[k], s);
                min_slope[k] = f64::min(min_slope[k], s);
            }
        }
    }
    let failing: Vec<[f64; 2]> = (0..n * n)
        .filter(|&k| match rule {
            DrainageRule::Ponding => max_slope[k] < threshold,
            DrainageRule::Strict => min_slope[k] < threshold,
        })
        .map(|k| [pts[k % n], pts[k / n]])
        .collect();
    SlopeReport {
        points_per_axis: n,
        spacing_m: spacing,
        heights_m: heights,
        max_slope,
        min_slope,
        passes: failing.is_empty(),
        failing,
    }
}

/// Plan area with clear height ≥ `headroom_m` and not covered by a column
/// footprint, on a 100×100 raster of cell centres.
pub fn usable_area(surface: &ShellSurface, columns: &[Column], headroom_m: f64) -> f64 {
    let n = USABLE_AREA_RASTER;
    let span = surface.span_m();
    let cell = span / n as f64;
    let centres: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * cell).collect();
    let heights = surface.heights_on(&centres, &centres);
    let usable = (0..n * n)
        .filter(|&k| {
            let (x, y) = (centres[k % n], centres[k / n]);
            heights[k] >= headroom_m
                && !columns.iter().any(|c| {
                    let half = 0.5 * c.section_area_m2.sqrt();
                    (x - c.position_m[0]).abs() <= half && (y - c.position_m[1]).abs() <= half
                })
        })
        .count();
    usable as f64 * cell * cell
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    MinimizeBest,
    MaximizeBest,
}

/// Affine 1–100 rescale within the cohort; best → 100, worst → 1.
pub fn grade(values: &[f64], orientation: Orientation) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(param("values", "grading needs at least one value"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (best, worst) = match orientation {
        Orientation::MinimizeBest => (lo, hi),
        Orientation::MaximizeBest => (hi, lo),
    };
    if best == worst {
        return Ok(vec![100.0; values.len()]);
    }
    Ok(values.iter().map(|&v| 1.0 + 99.0 * (worst - v) / (worst - best)).collect())
}

/// Grade by `primary`, falling back to `secondary` when the cohort ties on it.
fn grade_with_fallback(primary: &[f64], secondary: &[f64]) -> Result<Vec<f64>> {
    let tied = primary.iter().all(|&v| v == primary[0]);
    grade(if tied { secondary } else { primary }, Orientation::MinimizeBest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub cms: f64,
    pub ua: f64,
    pub lc: f64,
    pub fc: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            cms: 0.4,
            ua: 0.4,
            lc: 0.1,
            fc: 0.1,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.cms, self.ua, self.lc, self.fc];
        if all.iter().any(|w| !(*w >= 0.0)) {
            return Err(param("weights", "weights must be >= 0"));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(param("weights", format!("weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Raw performance metrics of one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cms_m2: f64,
    pub ua_m2: f64,
    pub lc_volume_m3: f64,
    pub lc_count: usize,
    pub fc_volume_m3: f64,
    pub fc_count: usize,
    pub min_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grades {
    pub cms: f64,
    pub ua: f64,
    pub lc: f64,
    pub fc: f64,
}

impl Grades {
    pub fn weighted(&self, w: &Weights) -> f64 {
        w.cms * self.cms + w.ua * self.ua + w.lc * self.lc + w.fc * self.fc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankEntry {
    /// Index into the candidate list.
    pub index: usize,
    pub grades: Grades,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankingStatus {
    Ranked,
    AllRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub status: RankingStatus,
    /// Drainage survivors, best first.
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    pub fn winner(&self) -> Option<&RankEntry> {
        self.entries.first()
    }

    pub fn entry_for(&self, index: usize) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.index == index)
    }
}

/// Drop drainage failures, grade the survivors per criterion and sort by
/// weighted score (ties: lower CMS, higher UA, input order).
pub fn rank_designs(metrics: &[Metrics], drainage_pass: &[bool], weights: &Weights) -> Result<Ranking> {
    if metrics.is_empty() {
        return Err(param("candidates", "ranking needs at least one candidate"));
    }
    if metrics.len() != drainage_pass.len() {
        return Err(param("drainage_pass", "one drainage flag per candidate is required"));
    }
    weights.validate()?;
    let survivors: Vec<usize> = (0..metrics.len()).filter(|&i| drainage_pass[i]).collect();
    if survivors.is_empty() {
        return Ok(Ranking {
            status: RankingStatus::AllRejected,
            entries: Vec::new(),
        });
    }
    let pick = |f: fn(&Metrics) -> f64| -> Vec<f64> { survivors.iter().map(|&i| f(&metrics[i])).collect() };
    let g_cms = grade(&pick(|m| m.cms_m2), Orientation::MinimizeBest)?;
    let g_ua = grade(&pick(|m| m.ua_m2), Orientation::MaximizeBest)?;
    let g_lc = grade_with_fallback(&pick(|m| m.lc_volume_m3), &pick(|m| m.lc_count as f64))?;
    let g_fc = grade_with_fallback(&pick(|m| m.fc_volume_m3), &pick(|m| m.fc_count as f64))?;

    let mut entries: Vec<RankEntry> = survivors
        .iter()
        .enumerate()
        .map(|(s, &index)| {
            let grades = Grades {
                cms: g_cms[s],
                ua: g_ua[s],
                lc: g_lc[s],
                fc: g_fc[s],
            };
            RankEntry {
                index,
                grades,
                score: grades.weighted(weights),
                rank: 0,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        let (ma, mb) = (&metrics[a.index], &metrics[b.index]);
        b.score
            .total_cmp(&a.score)
            .then(ma.cms_m2.total_cmp(&mb.cms_m2))
            .then(mb.ua_m2.total_cmp(&ma.ua_m2))
            .then(a.index.cmp(&b.index))
    });
    for (r, e) in entries.iter_mut().enumerate() {
        e.rank = r + 1;
    }
    Ok(Ranking {
        status: RankingStatus::Ranked,
        entries,
    })
}

/// Thin-plate spline through scattered `(x, y, z)` supports, meshed on `[0, span]²`.
pub fn fit_support_surface(points: &[[f64; 3]], span_m: f64) -> Result<TriMesh> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Geometry("a supported surface needs at least three support points".into()));
    }
    let phi = |r2: f64| if r2 > 0.0 { 0.5 * r2 * r2.ln() } else { 0.0 };
    let size = n + 3;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    for i in 0..n {
        for j in 0..n {
            let r2 = (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2);
            a[(i, j)] = phi(r2);
        }
        let row = [1.0, points[i][0], points[i][1]];
        for (c, v) in row.into_iter().enumerate() {
            a[(i, n + c)] = v;
            a[(n + c, i)] = v;
        }
        rhs[i] = points[i][2];
    }
    let coef = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Geometry("support points are collinear or coincident".into()))?;
    let pts = lattice_points(SUPPORT_FIT_SAMPLES, span_m);
    let mut z = Vec::with_capacity(pts.len() * pts.len());
    for &y in &pts {
        for &x in &pts {
            let mut v = coef[n] + coef[n + 1] * x + coef[n + 2] * y;
            for (k, p) in points.iter().enumerate() {
                v += coef[k] * phi((x - p[0]).powi(2) + (y - p[1]).powi(2));
            }
            z.push(v);
        }
    }
    Ok(TriMesh::height_field(&pts, &pts, &z))
}

fn support_points(anchors: &AnchorConfig, columns: &ColumnSet) -> Vec<[f64; 3]> {
    anchors
        .points
        .iter()
        .map(|a| [a[0], a[1], 0.0])
        .chain(columns.all().map(|c| [c.position_m[0], c.position_m[1], c.height_m]))
        .collect()
}

/// Perimeter and area of the surface spanned by the anchors and column tops.
pub fn supported_surface_metrics(anchors: &AnchorConfig, columns: &ColumnSet, span_m: f64) -> Result<SurfaceMetrics> {
    measure_mesh(&fit_support_surface(&support_points(anchors, columns), span_m)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormworkReduction {
    pub columns: ColumnSet,
    /// Indices of removed columns in the original formwork list, in removal order.
    pub removed: Vec<usize>,
    pub reference: SurfaceMetrics,
    pub reduced: SurfaceMetrics,
    pub tolerance: Tolerance,
}

/// Removal order: ascending participation, ties by column index.
pub fn removal_order(reactions_kn: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reactions_kn.len()).collect();
    order.sort_by(|&a, &b| reactions_kn[a].abs().total_cmp(&reactions_kn[b].abs()).then(a.cmp(&b)));
    order
}

/// Greedily drop formwork columns while the supported surface stays within
/// `tolerance` of the full-layout reference. Columns with exactly zero
/// reaction carry nothing and are dropped unconditionally.
pub fn reduce_formwork(
    anchors: &AnchorConfig,
    columns: &ColumnSet,
    reactions_kn: &[f64],
    tolerance: Tolerance,
    span_m: f64,
) -> Result<FormworkReduction> {
    if reactions_kn.len() != columns.formwork.len() {
        return Err(param("reactions", "one reaction per formwork column is required"));
    }
    let reference = supported_surface_metrics(anchors, columns, span_m)?;
    let order = removal_order(reactions_kn);
    let mut present = vec![true; columns.formwork.len()];
    let mut removed = Vec::new();
    let with_present = |present: &[bool]| ColumnSet {
        load_bearing: columns.load_bearing.clone(),
        formwork: columns
            .formwork
            .iter()
            .zip(present)
            .filter(|(_, &p)| p)
            .map(|(c, _)| *c)
            .collect(),
    };
    let mut current = reference;

    for &k in &order {
        if reactions_kn[k] == 0.0 {
            present[k] = false;
            removed.push(k);
        }
    }
    if !removed.is_empty() {
        current = supported_surface_metrics(anchors, &with_present(&present), span_m)?;
    }
    loop {
        let mut accepted = false;
        for &k in &order {
            if !present[k] {
                continue;
            }
            present[k] = false;
            let trial = with_present(&present);
            let ok = trial.count() + anchors.points.len() >= 3 && {
                let m = supported_surface_metrics(anchors, &trial, span_m)?;
                let fits = (m.perimeter_m - reference.perimeter_m).abs() <= tolerance.perimeter_m
                    && (m.area_m2 - reference.area_m2).abs() <= tolerance.area_m2;
                if fits {
                    current = m;
                }
                fits
            };
            if ok {
                removed.push(k);
                accepted = true;
                break;
            }
            present[k] = true;
        }
        if !accepted {
            break;
        }
    }
    Ok(FormworkReduction {
        columns: with_present(&present),
        removed,
        reference,
        reduced: current,
        tolerance,
    })
}

/// Vertical reaction (kN, absolute) at every formwork column under the
/// design load case, with anchors pinned, load-bearing columns fixed and
/// formwork columns pinned.
pub fn formwork_reactions(
    surface: &ShellSurface,
    anchors: &AnchorConfig,
    columns: &ColumnSet,
    settings: &AnalysisSettings,
    lattice: usize,
) -> Result<Vec<f64>> {
    let layout = SupportLayout::Points(design_supports(anchors, columns, true));
    let frame = frame_from_surface(surface, lattice, &settings.section(), settings.material, &layout)?;
    let area = measure(surface)?.area_m2;
    let lc = settings.load_case(area)?;
    let loads = shell_nodal_loads(&frame, surface, &lc, settings.precompression_n);
    let result = solve(&frame.model, &loads)?;
    Ok(columns
        .formwork
        .iter()
        .map(|c| {
            let node = frame.nearest_node(c.position_m[0], c.position_m[1]);
            result.reactions_kn.get(&node).map_or(0.0, |r| r[2].abs())
        })
        .collect())
}

fn design_supports(anchors: &AnchorConfig, columns: &ColumnSet, with_formwork: bool) -> Vec<([f64; 2], Support)> {
    let mut s: Vec<([f64; 2], Support)> = anchors.points.iter().map(|&p| (p, Support::Pinned)).collect();
    s.extend(columns.load_bearing.iter().map(|c| (c.position_m, Support::Fixed)));
    if with_formwork {
        s.extend(columns.formwork.iter().map(|c| (c.position_m, Support::Pinned)));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub anchor_kinds: Vec<AnchorKind>,
    pub iterations: usize,
    pub seed: u64,
    pub amplitude_cap_m: f64,
    pub weights: Weights,
    pub slope_threshold: f64,
    pub drainage_rule: DrainageRule,
    pub span_m: f64,
    pub control_divisions: usize,
    pub resolution: usize,
    pub columns: ColumnConfig,
    pub headroom_m: f64,
    /// Formwork reduction tolerances as a fraction of the reference P and a.
    pub formwork_tolerance_fraction: f64,
    /// Lattice cells per axis for the reaction solves.
    pub reaction_lattice: usize,
    /// Lattice cells per axis for the winner's deflection check.
    pub check_lattice: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            anchor_kinds: AnchorKind::ALL.to_vec(),
            iterations: 20,
            seed: 7,
            amplitude_cap_m: 3.0,
            weights: Weights::default(),
            slope_threshold: 0.02,
            drainage_rule: DrainageRule::Ponding,
            span_m: 2.0,
            control_divisions: 8,
            resolution: 48,
            columns: ColumnConfig::default(),
            headroom_m: 1.5,
            formwork_tolerance_fraction: 0.02,
            reaction_lattice: 8,
            check_lattice: 16,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.anchor_kinds.is_empty() {
            return Err(param("anchor_kinds", "at least one anchor configuration is required"));
        }
        if self.iterations == 0 {
            return Err(param("iterations", "must be >= 1"));
        }
        if !(self.amplitude_cap_m >= 0.0 && self.amplitude_cap_m.is_finite()) {
            return Err(param("amplitude_cap_m", "must be >= 0"));
        }
        self.weights.validate()?;
        if !(self.slope_threshold > 0.0) {
            return Err(param("slope_threshold", "must be > 0"));
        }
        if !(self.span_m > 0.0) {
            return Err(param("span_m", "must be > 0"));
        }
        if self.control_divisions < 2 {
            return Err(param("control_divisions", "must be >= 2"));
        }
        if self.resolution < self.control_divisions + 1 {
            return Err(param("resolution", "must be at least the control points per axis"));
        }
        if !(self.columns.section_side_m > 0.0 && self.columns.load_bearing_clearance_m >= 0.0) {
            return Err(param("columns", "section side must be > 0 and clearance >= 0"));
        }
        if !(self.formwork_tolerance_fraction >= 0.0) {
            return Err(param("formwork_tolerance_fraction", "must be >= 0"));
        }
        if self.reaction_lattice < 2 || self.check_lattice < 2 {
            return Err(param("lattice", "lattices need at least 2 cells per axis"));
        }
        Ok(())
    }
}

/// Seeded canopy over the base square.
///
/// Control heights rise from the anchors as `A·(d/d_max)^p` plus an offset
/// `u ~ U[0, A/5]`; anchor control points sit at zero. `A` is drawn from
/// `[cap/2, cap]`, `p` from `[0.5, 1.5]`; the result is scaled down if the
/// interpolated surface would exceed the cap.
pub fn shelter_surface(anchors: &AnchorConfig, iteration: usize, cfg: &OptimizerConfig) -> Result<ShellSurface> {
    let mut stream = KeyedStream::new(derive_seed(cfg.seed, anchors.kind.name()), iteration as u64);
    let cap_mm = cfg.amplitude_cap_m * 1000.0;
    let amplitude = cap_mm * (0.5 + 0.5 * stream.unit(0));
    let exponent = 0.5 + stream.unit(1);
    let f = cfg.control_divisions;
    let n = f + 1;
    let h = cfg.span_m / f as f64;
    let anchor_nodes: Vec<(usize, usize)> = anchors
        .points
        .iter()
        .map(|a| ((a[0] / h).round() as usize, (a[1] / h).round() as usize))
        .collect();
    let distance: Vec<f64> = (0..n * n)
        .map(|k| {
            let (x, y) = ((k % n) as f64 * h, (k / n) as f64 * h);
            anchors
                .points
                .iter()
                .map(|a| ((a[0] - x).powi(2) + (a[1] - y).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let d_max = distance.iter().copied().fold(0.0, f64::max);
    let z_mm: Vec<f64> = (0..n * n)
        .map(|k| {
            if anchor_nodes.contains(&(k % n, k / n)) {
                0.0
            } else {
                amplitude * (distance[k] / d_max).powf(exponent) + amplitude / 5.0 * stream.unit(2 + k as u64)
            }
        })
        .collect();
    let grid = ControlGrid {
        divisions: f,
        amplitude_mm: amplitude,
        frequency: 0,
        span_mm: cfg.span_m * 1000.0,
        z_mm,
        seed: cfg.seed,
        iteration,
    };
    let surface = interpolate_surface(&grid, cfg.resolution)?;
    let (_, top) = surface.mesh.z_range();
    if top > cfg.amplitude_cap_m {
        surface.scaled(cfg.amplitude_cap_m / top)
    } else {
        Ok(surface)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDesign {
    pub id: String,
    pub anchors: AnchorConfig,
    pub iteration: usize,
    pub surface: ShellSurface,
    /// Initial 16-column layout.
    pub columns: ColumnSet,
    /// Present for drainage survivors.
    pub reduction: Option<FormworkReduction>,
    pub drainage: SlopeReport,
    pub metrics: Metrics,
}

/// Measure one candidate: CMS, drainage, UA (load-bearing footprints), LC,
/// and FC after formwork reduction when the candidate drains.
pub fn evaluate_candidate(
    anchors: &AnchorConfig,
    iteration: usize,
    cfg: &OptimizerConfig,
    settings: &AnalysisSettings,
) -> Result<CandidateDesign> {
    let surface = shelter_surface(anchors, iteration, cfg)?;
    let shape = measure(&surface)?;
    let drainage = slope_grid(&surface, cfg.slope_threshold, cfg.drainage_rule);
    let columns = ColumnSet::initial(&surface, anchors, &cfg.columns);
    let reduction = if drainage.passes {
        let reactions = formwork_reactions(&surface, anchors, &columns, settings, cfg.reaction_lattice)?;
        let reference = supported_surface_metrics(anchors, &columns, cfg.span_m)?;
        let tol = Tolerance {
            perimeter_m: cfg.formwork_tolerance_fraction * reference.perimeter_m,
            area_m2: cfg.formwork_tolerance_fraction * reference.area_m2,
        };
        Some(reduce_formwork(anchors, &columns, &reactions, tol, cfg.span_m)?)
    } else {
        None
    };
    let formwork = reduction.as_ref().map_or(&columns.formwork, |r| &r.columns.formwork);
    let metrics = Metrics {
        cms_m2: shape.area_m2,
        ua_m2: usable_area(&surface, &columns.load_bearing, cfg.headroom_m),
        lc_volume_m3: columns.load_bearing_volume_m3(),
        lc_count: columns.load_bearing.len(),
        fc_volume_m3: total_volume(formwork),
        fc_count: formwork.len(),
        min_slope: drainage.min_drainage_slope(),
    };
    Ok(CandidateDesign {
        id: format!("{}-{:02}", anchors.kind.name(), iteration),
        anchors: anchors.clone(),
        iteration,
        surface,
        columns,
        reduction,
        drainage,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WinnerReport {
    pub index: usize,
    /// Final layout: load-bearing columns plus the formwork kept after reduction.
    pub columns: ColumnSet,
    pub analysis: ShellAnalysis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub candidates: Vec<CandidateDesign>,
    pub ranking: Ranking,
    pub winner: Option<WinnerReport>,
}

/// Generate, gate, grade and rank every candidate, then check the winner.
pub fn optimize(cfg: &OptimizerConfig, settings: &AnalysisSettings) -> Result<OptimizationReport> {
    cfg.validate()?;
    settings.validate()?;
    let jobs: Vec<(AnchorConfig, usize)> = cfg
        .anchor_kinds
        .iter()
        .flat_map(|&k| (0..cfg.iterations).map(move |i| (k, i)))
        .map(|(k, i)| (AnchorConfig::new(k, cfg.span_m), i))
        .collect();
    let candidates: Vec<CandidateDesign> = jobs
        .par_iter()
        .map(|(a, i)| evaluate_candidate(a, *i, cfg, settings))
        .collect::<Result<_>>()?;
    let metrics: Vec<Metrics> = candidates.iter().map(|c| c.metrics).collect();
    let passes: Vec<bool> = candidates.iter().map(|c| c.drainage.passes).collect();
    let ranking = rank_designs(&metrics, &passes, &cfg.weights)?;

    let winner = match ranking.winner() {
        None => None,
        Some(entry) => {
            let c = &candidates[entry.index];
            let columns = c.reduction.as_ref().map_or_else(|| c.columns.clone(), |r| r.columns.clone());
            // formwork is struck after jamming; the shell stands on anchors and load-bearing columns
            let check = AnalysisSettings {
                lattice: cfg.check_lattice,
                supports: SupportLayout::Points(design_supports(&c.anchors, &columns, false)),
                ..settings.clone()
            };
            let analysis = check.analyze(&c.surface)?;
            Some(WinnerReport {
                index: entry.index,
                columns,
                analysis,
            })
        }
    };
    Ok(OptimizationReport {
        candidates,
        ranking,
        winner,
    })
}

pub const RANKING_HEADER: &str = "candidate_id,anchor_kind,cms_m2,ua_m2,lc_volume_m3,lc_count,fc_volume_m3,fc_count,min_slope,drainage_pass,grade_cms,grade_ua,grade_lc,grade_fc,weighted_score,rank";

/// Ranking table in candidate order; rejected candidates have empty grade,
/// score and rank cells.
pub fn ranking_csv(report: &OptimizationReport) -> String {
    let mut out = String::from(RANKING_HEADER);
    out.push('\n');
    for (i, c) in report.candidates.iter().enumerate() {
        let m = &c.metrics;
        let _ = write!(
            out,
            "{},{},{:.9},{:.6},{:.9},{},{:.9},{},{:.9},{}",
            c.id,
            c.anchors.kind,
            m.cms_m2,
            m.ua_m2,
            m.lc_volume_m3,
            m.lc_count,
            m.fc_volume_m3,
            m.fc_count,
            m.min_slope,
            c.drainage.passes
        );
        match report.ranking.entry_for(i) {
            Some(e) => {
                let _ = writeln!(
                    out,
                    ",{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                    e.grades.cms, e.grades.ua, e.grades.lc, e.grades.fc, e.score, e.rank
                );
            }
            None => out.push_str(",,,,,,\n"),
        }
    }
    out
}

/// Failing drainage points of every candidate: `candidate_id,x_m,y_m`.
pub fn drainage_markers_csv(report: &OptimizationReport) -> String {
    let mut out = String::from("candidate_id,x_m,y_m\n");
    for c in &report.candidates {
        for p in &c.drainage.failing {
            let _ = writeln!(out, "{},{:.6},{:.6}", c.id, p[0], p[1]);
        }
    }
    out
}
