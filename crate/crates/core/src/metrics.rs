//! Evaluation metrics: Chamfer distance between sample sets, detection
//! precision, recall and F1 under optimal one-to-one matching, and F1 of the
//! FE and EV incidence relations.
//!
//! Primitives are compared through deterministic samples. Unbounded kinds
//! are sampled over their recorded extent or, without one, clipped to the
//! unit box.

use std::f64::consts::{PI, TAU};

use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brep::{BRepModel, BoolMatrix};
use crate::fitting::AnyPrimitive;
use crate::geom::{orthonormal_basis, Vec3};
use crate::kdtree::KdTree;
use crate::primitives::{CurvePrimitive, Extent, SurfacePrimitive};

/// Default samples per unit area for surfaces.
pub const SURFACE_DENSITY: f64 = 10_000.0;
/// Default samples per unit length for curves.
pub const CURVE_DENSITY: f64 = 1_000.0;
/// Smallest sample count of any primitive.
pub const MIN_SAMPLES: usize = 16;
/// Largest sample count of any primitive.
pub const MAX_SAMPLES: usize = 250_000;
/// Cost matrix entries are Chamfer distances in units of this length.
const COST_QUANTUM: f64 = 1e-12;
/// Points this far outside the unit box still count as inside.
const BOX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("primitive has nothing to sample inside its extent")]
    EmptyExtent,
    #[error("sampling density must be positive and finite (got {0})")]
    InvalidDensity(f64),
    #[error("chamfer distance needs two non-empty point sets")]
    EmptyInput,
}

/// Element classes scored separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    Vertex,
    Curve,
    Surface,
}

fn in_unit_box(p: &Vec3) -> bool {
    p.iter()
        .all(|&c| (-BOX_SLACK..=1.0 + BOX_SLACK).contains(&c))
}

fn unit_box_corners() -> impl Iterator<Item = Vec3> {
    (0..8).map(|k| Vec3::new((k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64))
}

fn target_count(density: f64, measure: f64) -> usize {
    ((density * measure).round() as usize).clamp(MIN_SAMPLES, MAX_SAMPLES)
}

/// Cell-centered stratified values `lo + (i + 0.5) * (hi - lo) / n`.
fn strata(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64)
}

fn check_density(density: f64) -> Result<(), MetricsError> {
    if density > 0.0 && density.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::InvalidDensity(density))
    }
}

/// Range of `f` over the unit box corners.
fn box_range(f: impl Fn(&Vec3) -> f64) -> [f64; 2] {
    unit_box_corners().fold([f64::INFINITY, f64::NEG_INFINITY], |r, c| {
        let x = f(&c);
        [r[0].min(x), r[1].max(x)]
    })
}

/// Samples a `(u, v)` rectangle mapped by `at` with `n_u * n_v` strata
/// where the aspect follows `len_u : len_v`, keeping points accepted by
/// `keep`. When clipping leaves too few, the grid is refined.
fn rect_samples(
    u: [f64; 2],
    v: [f64; 2],
    len_u: f64,
    len_v: f64,
    count: usize,
    at: impl Fn(f64, f64) -> Vec3,
    keep: impl Fn(&Vec3) -> bool,
) -> Vec<Vec3> {
    let mut target = count as f64;
    for _ in 0..8 {
        let aspect = if len_v > 0.0 { len_u / len_v } else { 1.0 };
        let n_u = ((target * aspect).sqrt().round() as usize).max(1);
        let n_v = ((target / n_u as f64).round() as usize).max(1);
        let out: Vec<Vec3> = strata(u[0], u[1], n_u)
            .flat_map(|a| strata(v[0], v[1], n_v).map(move |b| (a, b)))
            .map(|(a, b)| at(a, b))
            .filter(|p| keep(p))
            .collect();
        if out.len() >= MIN_SAMPLES.min(count) || out.len() >= MAX_SAMPLES / 4 {
            return out;
        }
        target *= 4.0;
    }
    Vec::new()
}

fn sample_surface(s: &SurfacePrimitive, density: f64, extent: Option<&Extent>) -> Vec<Vec3> {
    let clip = extent.is_none();
    let keep = |p: &Vec3| !clip || in_unit_box(p);
    match s {
        SurfacePrimitive::Plane { normal, offset } => {
            let (e1, e2) = orthonormal_basis(normal);
            let o = normal * *offset;
            let (u, v) = match extent {
                Some(e) => (e.u, e.v),
                None => (
                    box_range(|c| (c - o).dot(&e1)),
                    box_range(|c| (c - o).dot(&e2)),
                ),
            };
            let (lu, lv) = (u[1] - u[0], v[1] - v[0]);
            let count = ((density * lu * lv).round() as usize).clamp(MIN_SAMPLES, MAX_SAMPLES);
            // When clipping, `count` covers the bounding rectangle; the kept
            // share approximates the clipped area times the density.
            rect_samples(u, v, lu, lv, count, |a, b| o + e1 * a + e2 * b, keep)
        }
        SurfacePrimitive::Sphere { center, radius } => {
            let n = target_count(density, 4.0 * PI * radius * radius);
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let (st, ct) = (golden * i as f64).sin_cos();
                    center + Vec3::new(rho * ct, rho * st, z) * *radius
                })
                .collect()
        }
        SurfacePrimitive::Cylinder {
            axis_point,
            axis,
            radius,
        } => {
            let (e1, e2) = orthonormal_basis(axis);
            let h = match extent {
                Some(e) => e.v,
                None => box_range(|c| (c - axis_point).dot(axis)),
            };
            let (lu, lv) = (TAU * radius, h[1] - h[0]);
            let count = target_count(density, lu * lv);
            let at =
                |t: f64, z: f64| axis_point + axis * z + (e1 * t.cos() + e2 * t.sin()) * *radius;
            rect_samples([0.0, TAU], h, lu, lv, count, at, keep)
        }
        SurfacePrimitive::Cone {
            apex,
            axis,
            half_angle,
        } => {
            let (e1, e2) = orthonormal_basis(axis);
            let (s, c) = half_angle.sin_cos();
            let h = match extent {
                Some(e) => e.v,
                None => box_range(|p| (p - apex).dot(axis)),
            };
            let h = [h[0].max(0.0), h[1].max(0.0)];
            // Uniform in `h^2` gives uniform area along the nappe.
            let (q0, q1) = (h[0] * h[0], h[1] * h[1]);
            let area = PI * s / (c * c) * (q1 - q0);
            let mean_circ = TAU * (s / c) * 0.5 * (h[0] + h[1]);
            let slant = (h[1] - h[0]) / c;
            let count = target_count(density, area);
            let at = |t: f64, q: f64| {
                let z = q.sqrt();
                apex + axis * z + (e1 * t.cos() + e2 * t.sin()) * (z * s / c)
            };
            rect_samples([0.0, TAU], [q0, q1], mean_circ, slant, count, at, keep)
        }
        SurfacePrimitive::Torus {
            center,
            axis,
            major_radius,
            minor_radius,
        } => {
            let (e1, e2) = orthonormal_basis(axis);
            let (big, small) = (*major_radius, *minor_radius);
            let count = target_count(density, 4.0 * PI * PI * big * small);
            let n_tube = ((count as f64 * small / big).sqrt().round() as usize).max(4);
            let per_ring = count as f64 / n_tube as f64;
            let mut out = Vec::with_capacity(count);
            for phi in strata(0.0, TAU, n_tube) {
                let (sp, cp) = phi.sin_cos();
                // Ring length is proportional to its distance from the axis.
                let m = ((per_ring * (big + small * cp) / big).round() as usize).max(1);
                for t in strata(0.0, TAU, m) {
                    let radial = e1 * t.cos() + e2 * t.sin();
                    out.push(center + radial * (big + small * cp) + axis * (small * sp));
                }
            }
            out
        }
    }
}

/// Parameter interval of a line inside the unit box (slab clipping).
fn line_in_box(point: &Vec3, dir: &Vec3) -> Option<[f64; 2]> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..3 {
        if dir[k].abs() < 1e-15 {
            if !(0.0..=1.0).contains(&point[k]) {
                return None;
            }
            continue;
        }
        let (a, b) = ((0.0 - point[k]) / dir[k], (1.0 - point[k]) / dir[k]);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (hi > lo).then_some([lo, hi])
}

fn sample_curve(c: &CurvePrimitive, density: f64, extent: Option<&Extent>) -> Vec<Vec3> {
    match c {
        CurvePrimitive::Line { point, direction } => {
            let range = match extent {
                Some(e) => Some(e.u),
                None => line_in_box(point, direction),
            };
            let Some(u) = range.filter(|u| u[1] > u[0]) else {
                return Vec::new();
            };
            let n = target_count(density, u[1] - u[0]);
            strata(u[0], u[1], n)
                .map(|t| point + direction * t)
                .collect()
        }
        _ => {
            let n = target_count(density, c.measure(None));
            (0..n)
                .map(|i| c.point_at(TAU * i as f64 / n as f64))
                .collect()
        }
    }
}

/// Deterministic quasi-uniform samples with about `density` points per unit
/// length or area, at least [`MIN_SAMPLES`]. Unbounded primitives use
/// `extent` when given and are clipped to the unit box otherwise.
pub fn sample_primitive(
    prim: &AnyPrimitive,
    density: f64,
    extent: Option<&Extent>,
) -> Result<Vec<Vec3>, MetricsError> {
    check_density(density)?;
    let out = match prim {
        AnyPrimitive::Surface(s) => sample_surface(s, density, extent),
        AnyPrimitive::Curve(c) => sample_curve(c, density, extent),
    };
    if out.is_empty() {
        Err(MetricsError::EmptyExtent)
    } else {
        Ok(out)
    }
}

fn mean_nearest(a: &[Vec3], tree_b: &KdTree) -> f64 {
    let total: f64 = a
        .iter()
        .map(|p| {
            tree_b
                .nearest(&[p.x, p.y, p.z])
                .map_or(f64::INFINITY, |(_, d2)| d2.sqrt())
        })
        .sum();
    total / a.len() as f64
}

fn chamfer_trees(a: &[Vec3], tree_a: &KdTree, b: &[Vec3], tree_b: &KdTree) -> f64 {
    0.5 * (mean_nearest(a, tree_b) + mean_nearest(b, tree_a))
}

/// Symmetric mean of unsquared nearest-neighbour distances:
/// `(mean_a min |a - b| + mean_b min |b - a|) / 2`.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(chamfer_trees(
        a,
        &KdTree::from_vecs(a),
        b,
        &KdTree::from_vecs(b),
    ))
}

/// Sample sets of one model, per element class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElementSamples {
    pub vertices: Vec<Vec<Vec3>>,
    pub curves: Vec<Vec<Vec3>>,
    pub surfaces: Vec<Vec<Vec3>>,
}

impl ElementSamples {
    pub fn class(&self, class: ElementClass) -> &[Vec<Vec3>] {
        match class {
            ElementClass::Vertex => &self.vertices,
            ElementClass::Curve => &self.curves,
            ElementClass::Surface => &self.surfaces,
        }
    }
}

/// Samples every element of `model`. Vertices are their own single sample.
pub fn sample_model(
    model: &BRepModel,
    surface_density: f64,
    curve_density: f64,
) -> Result<ElementSamples, MetricsError> {
    let surfaces = model
        .surfaces
        .par_iter()
        .map(|f| {
            sample_primitive(
                &AnyPrimitive::Surface(f.geometry.clone()),
                surface_density,
                f.extent.as_ref(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let curves = model
        .curves
        .par_iter()
        .map(|e| {
            sample_primitive(
                &AnyPrimitive::Curve(e.geometry.clone()),
                curve_density,
                e.extent.as_ref(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ElementSamples {
        vertices: model.vertices.iter().map(|v| vec![*v]).collect(),
        curves,
        surfaces,
    })
}

/// Chamfer distance between the unions of all samples of one class; `None`
/// when either side has no samples.
pub fn class_chamfer(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Option<f64> {
    let a: Vec<Vec3> = pred.iter().flatten().copied().collect();
    let b: Vec<Vec3> = gt.iter().flatten().copied().collect();
    chamfer(&a, &b).ok()
}

/// Pairwise Chamfer distances, `cost[i][j]` between `pred[i]` and `gt[j]`.
pub fn cost_matrix(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Vec<Vec<f64>> {
    let tp: Vec<KdTree> = pred.par_iter().map(|p| KdTree::from_vecs(p)).collect();
    let tg: Vec<KdTree> = gt.par_iter().map(|g| KdTree::from_vecs(g)).collect();
    (0..pred.len())
        .into_par_iter()
        .map(|i| {
            (0..gt.len())
                .map(|j| {
                    if pred[i].is_empty() || gt[j].is_empty() {
                        f64::INFINITY
                    } else {
                        chamfer_trees(&pred[i], &tp[i], &gt[j], &tg[j])
                    }
                })
                .collect()
        })
        .collect()
}

/// One-to-one assignment of `min(rows, cols)` pairs minimizing the total
/// cost. Returns `(row, col)` pairs sorted by row.
pub fn optimal_assignment(cost: &[Vec<f64>]) -> Vec<[usize; 2]> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Finite costs quantized to integers; the solver needs a total order.
    let big = (1u64 << 52) as f64;
    let q = |x: f64| -> i64 { (x / COST_QUANTUM).round().min(big) as i64 };
    let transpose = rows > cols;
    let (r, c) = if transpose {
        (cols, rows)
    } else {
        (rows, cols)
    };
    let mut values = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            let x = if transpose { cost[j][i] } else { cost[i][j] };
            values.push(if x.is_finite() { q(x) } else { big as i64 });
        }
    }
    let m = Matrix::from_vec(r, c, values).expect("rectangular cost matrix");
    let (_, assign) = kuhn_munkres_min(&m);
    let mut pairs: Vec<[usize; 2]> = assign
        .into_iter()
        .enumerate()
        .map(|(i, j)| if transpose { [j, i] } else { [i, j] })
        .collect();
    pairs.sort_unstable();
    pairs
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Scores of one element class at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(pred, gt)` index pairs whose Chamfer distance is below the threshold.
    pub matched: Vec<[usize; 2]>,
    /// Matched predictions.
    pub good_count: usize,
    /// All predictions.
    pub total_count: usize,
}

impl ClassScores {
    /// Two empty lists agree perfectly; one empty list scores zero.
    fn from_matches(matched: Vec<[usize; 2]>, n_pred: usize, n_gt: usize) -> Self {
        let (precision, recall, f) = if n_pred == 0 && n_gt == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let k = matched.len() as f64;
            let p = if n_pred > 0 { k / n_pred as f64 } else { 0.0 };
            let r = if n_gt > 0 { k / n_gt as f64 } else { 0.0 };
            (p, r, f1(p, r))
        };
        ClassScores {
            precision,
            recall,
            f1: f,
            good_count: matched.len(),
            total_count: n_pred,
            matched,
        }
    }
}

/// Scores of all classes at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub threshold: f64,
    pub vertex: ClassScores,
    pub curve: ClassScores,
    pub surface: ClassScores,
}

impl DetectionReport {
    pub fn class(&self, class: ElementClass) -> &ClassScores {
        match class {
            ElementClass::Vertex => &self.vertex,
            ElementClass::Curve => &self.curve,
            ElementClass::Surface => &self.surface,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Threshold-averaged precision, recall and F1 per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedReport {
    pub vertex: MeanScores,
    pub curve: MeanScores,
    pub surface: MeanScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub per_threshold: Vec<DetectionReport>,
    pub average: AveragedReport,
}

impl DetectionScores {
    pub fn at(&self, threshold: f64) -> Option<&DetectionReport> {
        self.per_threshold.iter().find(|r| r.threshold == threshold)
    }
}

/// Optimal assignment with its pair costs for one class.
fn class_assignment(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Vec<([usize; 2], f64)> {
    let cost = cost_matrix(pred, gt);
    optimal_assignment(&cost)
        .into_iter()
        .map(|[i, j]| ([i, j], cost[i][j]))
        .collect()
}

/// Per class, one optimal assignment minimizes the total Chamfer distance;
/// at each threshold the assigned pairs below it count as matched.
pub fn detection_scores(
    pred: &ElementSamples,
    gt: &ElementSamples,
    thresholds: &[f64],
) -> DetectionScores {
    let classes = [
        ElementClass::Vertex,
        ElementClass::Curve,
        ElementClass::Surface,
    ];
    let assignments: Vec<Vec<([usize; 2], f64)>> = classes
        .iter()
        .map(|&c| class_assignment(pred.class(c), gt.class(c)))
        .collect();
    let scores = |k: usize, t: f64| {
        let c = classes[k];
        let matched = assignments[k]
            .iter()
            .filter(|(_, d)| *d < t)
            .map(|(p, _)| *p)
            .collect();
        ClassScores::from_matches(matched, pred.class(c).len(), gt.class(c).len())
    };
    let per_threshold: Vec<DetectionReport> = thresholds
        .iter()
        .map(|&t| DetectionReport {
            threshold: t,
            vertex: scores(0, t),
            curve: scores(1, t),
            surface: scores(2, t),
        })
        .collect();
    let mean = |c: ElementClass| {
        let n = per_threshold.len().max(1) as f64;
        let sum = |f: fn(&ClassScores) -> f64| {
            per_threshold.iter().map(|r| f(r.class(c))).sum::<f64>() / n
        };
        MeanScores {
            precision: sum(|s| s.precision),
            recall: sum(|s| s.recall),
            f1: sum(|s| s.f1),
        }
    };
    let average = AveragedReport {
        vertex: mean(ElementClass::Vertex),
        curve: mean(ElementClass::Curve),
        surface: mean(ElementClass::Surface),
    };
    DetectionScores {
        per_threshold,
        average,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoScores {
    pub fe_f1: f64,
    pub ev_f1: f64,
}

fn relation_f1(
    pred: &BoolMatrix,
    gt: &BoolMatrix,
    rows: &[Option<usize>],
    cols: &[Option<usize>],
) -> f64 {
    let (n_pred, n_gt) = (pred.count_ones(), gt.count_ones());
    if n_pred == 0 && n_gt == 0 {
        return 1.0;
    }
    let tp = pred
        .ones()
        .into_iter()
        .filter(|&[i, j]| match (rows[i], cols[j]) {
            (Some(a), Some(b)) => gt.get(a, b),
            _ => false,
        })
        .count() as f64;
    let p = if n_pred > 0 { tp / n_pred as f64 } else { 0.0 };
    let r = if n_gt > 0 { tp / n_gt as f64 } else { 0.0 };
    f1(p, r)
}

fn index_map(n_pred: usize, matched: &[[usize; 2]]) -> Vec<Option<usize>> {
    let mut m = vec![None; n_pred];
    for &[p, g] in matched {
        m[p] = Some(g);
    }
    m
}

/// F1 of the FE and EV relations. A predicted entry is a true positive
/// when both its elements are matched and the matched GT entry is set;
/// precision is over all predicted entries and recall over all GT entries.
pub fn topo_f1(pred: &BRepModel, gt: &BRepModel, matching: &DetectionReport) -> TopoScores {
    let (nv, ne, nf) = pred.counts();
    let f = index_map(nf, &matching.surface.matched);
    let e = index_map(ne, &matching.curve.matched);
    let v = index_map(nv, &matching.vertex.matched);
    TopoScores {
        fe_f1: relation_f1(&pred.fe, &gt.fe, &f, &e),
        ev_f1: relation_f1(&pred.ev, &gt.ev, &e, &v),
    }
}
