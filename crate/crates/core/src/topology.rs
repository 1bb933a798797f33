//! Surface adjacency, curve extraction by surface intersection, curve
//! adjacency and vertex extraction, followed by B-Rep assembly.
//!
//! Surface cells of the true diagram are usually separated by curve or
//! vertex cells, so two surfaces count as cell-adjacent when their cells
//! touch directly, share a cell, or both touch one non-surface cell.
//! Pairwise stages run in parallel and are collected in pair order; every
//! deduplication pass walks a sorted candidate list sequentially.

use rayon::prelude::*;

use crate::brep::{BRepModel, BoolMatrix, Edge, Face};
use crate::cells::CellPoints;
use crate::fitting::{fit_best_curve_within, CellFit, RANSAC_THRESHOLD_FACTOR};
use crate::geom::{lex_cmp, Vec3};
use crate::kdtree::{min_cross_distance, KdTree};
use crate::primitives::{CurvePrimitive, SurfacePrimitive};

/// Both residuals of an accepted intersection sample are below this.
pub const INTERSECTION_TOL: f64 = 1e-5;
pub const INTERSECTION_ROUNDS: usize = 50;
/// Intersection-born curves are accepted up to `eps1` times this.
pub const CURVE_ACCEPT_FACTOR: f64 = 10.0;
/// Seeds per surface pair and sample sets per curve pair are strided down
/// to this many points.
const MAX_SEEDS: usize = 1024;
const CURVE_PROJECTION_ROUNDS: usize = 200;
const VERTEX_SEEDS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("surfaces do not intersect near the common points")]
    NoIntersection,
    #[error("inconsistent topology: {}", .0.join("; "))]
    InconsistentTopology(Vec<String>),
}

/// What a cell contributed to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRole {
    Surface,
    Curve,
    Other,
}

pub fn cell_roles(fits: &[CellFit]) -> Vec<CellRole> {
    fits.iter()
        .map(|f| match f {
            CellFit::Surface(_) => CellRole::Surface,
            CellFit::Multi(m) if !m.is_empty() => CellRole::Surface,
            CellFit::Curve(_) => CellRole::Curve,
            _ => CellRole::Other,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SurfaceRecord {
    pub cell: usize,
    pub primitive: SurfacePrimitive,
    pub rms: f64,
    pub points: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct CurveRecord {
    pub primitive: CurvePrimitive,
    pub rms: f64,
    /// Sorted surface indices.
    pub parents: Vec<usize>,
    /// Source cell for curves fitted from a curve cell.
    pub cell: Option<usize>,
    pub points: Vec<Vec3>,
}

impl CurveRecord {
    fn sort_key(&self) -> (usize, f64) {
        (
            self.parents.first().copied().unwrap_or(usize::MAX),
            self.rms,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionSample {
    pub point: Vec3,
    pub residual_i: f64,
    pub residual_j: f64,
}

fn strided<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max)
        .map(|i| items[i * items.len() / max].clone())
        .collect()
}

/// Surfaces in cell order. A multi-primitive cell contributes each member,
/// owning the cell points within the RANSAC inlier distance that no earlier
/// member claimed.
pub fn collect_surfaces(
    fits: &[CellFit],
    cell_points: &CellPoints,
    eps1: f64,
) -> Vec<SurfaceRecord> {
    let mut out = Vec::new();
    for (cell, fit) in fits.iter().enumerate() {
        let pts = &cell_points.points[cell];
        match fit {
            CellFit::Surface(r) => out.push(SurfaceRecord {
                cell,
                primitive: r.surface().expect("surface fit").clone(),
                rms: r.rms_error,
                points: pts.clone(),
            }),
            CellFit::Multi(members) => {
                let mut claimed = vec![false; pts.len()];
                for m in members {
                    let s = m.surface().expect("surface fit").clone();
                    let mut own = Vec::new();
                    for (k, p) in pts.iter().enumerate() {
                        if !claimed[k] && s.distance(p) < RANSAC_THRESHOLD_FACTOR * eps1 {
                            claimed[k] = true;
                            own.push(*p);
                        }
                    }
                    out.push(SurfaceRecord {
                        cell,
                        primitive: s,
                        rms: m.rms_error,
                        points: own,
                    });
                }
            }
            _ => {}
        }
    }
    out
}

/// Curves fitted directly from curve cells, without parents yet.
pub fn collect_cell_curves(fits: &[CellFit], cell_points: &CellPoints) -> Vec<CurveRecord> {
    fits.iter()
        .enumerate()
        .filter_map(|(cell, f)| match f {
            CellFit::Curve(r) => Some(CurveRecord {
                primitive: r.curve().expect("curve fit").clone(),
                rms: r.rms_error,
                parents: Vec::new(),
                cell: Some(cell),
                points: cell_points.points[cell].clone(),
            }),
            _ => None,
        })
        .collect()
}

fn cells_linked(adjacency: &BoolMatrix, roles: &[CellRole], a: usize, b: usize) -> bool {
    a == b
        || adjacency.get(a, b)
        || (0..roles.len())
            .any(|c| roles[c] != CellRole::Surface && adjacency.get(a, c) && adjacency.get(c, b))
}

/// FF: linked cells whose point sets come within `eps2`.
pub fn build_surface_adjacency(
    adjacency: &BoolMatrix,
    roles: &[CellRole],
    surfaces: &[SurfaceRecord],
    eps2: f64,
) -> BoolMatrix {
    let n = surfaces.len();
    let trees: Vec<KdTree> = surfaces
        .par_iter()
        .map(|s| KdTree::from_vecs(&s.points))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let hits: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| {
            cells_linked(adjacency, roles, surfaces[i].cell, surfaces[j].cell)
                && min_cross_distance(&surfaces[i].points, &trees[j]) < eps2
        })
        .collect();
    let mut ff = BoolMatrix::new(n, n);
    for (&(i, j), hit) in pairs.iter().zip(hits) {
        if hit {
            ff.set_symmetric(i, j);
        }
    }
    ff
}

/// Points of either set within `eps2` of the other surface.
pub fn common_points(a: &SurfaceRecord, b: &SurfaceRecord, eps2: f64) -> Vec<Vec3> {
    a.points
        .iter()
        .filter(|p| b.primitive.distance(p) < eps2)
        .chain(b.points.iter().filter(|p| a.primitive.distance(p) < eps2))
        .copied()
        .collect()
}

/// Moves `x` to the closest point on the line where the tangent planes of
/// both surfaces meet; alternating projection when they are near parallel.
fn intersection_step(fi: &SurfacePrimitive, fj: &SurfacePrimitive, x: &Vec3) -> Vec3 {
    let (qi, qj) = (fi.closest_point(x), fj.closest_point(x));
    let (ni, nj) = (fi.normal_at(x), fj.normal_at(x));
    let c = ni.dot(&nj);
    let det = 1.0 - c * c;
    if det < 1e-8 {
        return fj.closest_point(&qi);
    }
    let (ri, rj) = (ni.dot(&(x - qi)), nj.dot(&(x - qj)));
    let a = (ri - c * rj) / det;
    let b = (rj - c * ri) / det;
    x - ni * a - nj * b
}

/// Drives each seed onto both surfaces by tangent-plane projection until
/// it lies on both within [`INTERSECTION_TOL`]; seeds that do not get there
/// are dropped.
pub fn intersect_surfaces(
    fi: &SurfacePrimitive,
    fj: &SurfacePrimitive,
    seeds: &[Vec3],
) -> Result<Vec<IntersectionSample>, TopologyError> {
    let out: Vec<IntersectionSample> = seeds
        .iter()
        .filter_map(|seed| {
            // Iterates to a fixed point within the round budget, then
            // accepts on the tolerance.
            let mut x = *seed;
            for _ in 0..INTERSECTION_ROUNDS {
                let next = intersection_step(fi, fj, &x);
                if !next.iter().all(|v| v.is_finite()) {
                    return None;
                }
                let moved = (next - x).norm();
                x = next;
                if moved <= 1e-15 {
                    break;
                }
            }
            let (ri, rj) = (fi.distance(&x), fj.distance(&x));
            (ri < INTERSECTION_TOL && rj < INTERSECTION_TOL).then_some(IntersectionSample {
                point: x,
                residual_i: ri,
                residual_j: rj,
            })
        })
        .collect();
    if out.is_empty() {
        Err(TopologyError::NoIntersection)
    } else {
        Ok(out)
    }
}

/// Largest distance from a sample of either curve to the other curve.
fn curve_gap(a: &CurveRecord, b: &CurveRecord) -> f64 {
    let one_way = |x: &CurveRecord, y: &CurveRecord| {
        x.points
            .iter()
            .map(|p| y.primitive.distance(p))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn merge_sorted(a: &mut Vec<usize>, b: &[usize]) {
    a.extend_from_slice(b);
    a.sort_unstable();
    a.dedup();
}

fn median_distance(s: &SurfacePrimitive, points: &[Vec3]) -> f64 {
    let mut d: Vec<f64> = points.iter().map(|p| s.distance(p)).collect();
    if d.is_empty() {
        return f64::INFINITY;
    }
    let mid = d.len() / 2;
    *d.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Curves and FE. Every FF pair is intersected and the best curve through
/// the samples is kept when its rms is below `eps1 * 10`. Curves from
/// curve cells get as parents the surfaces whose cells touch theirs and
/// whose median distance to the curve samples is below `eps2`; a cell
/// curve with no such surface is dropped.
/// Duplicates (sampled Hausdorff distance below `eps3 / 2`) merge into one
/// record carrying the lower-rms geometry and the union of parents and
/// samples.
pub fn extract_curves(
    surfaces: &[SurfaceRecord],
    ff: &BoolMatrix,
    cell_curves: Vec<CurveRecord>,
    adjacency: &BoolMatrix,
    eps1: f64,
    eps2: f64,
    eps3: f64,
) -> (Vec<CurveRecord>, BoolMatrix) {
    let pairs: Vec<[usize; 2]> = ff.ones().into_iter().filter(|[i, j]| i < j).collect();
    let born: Vec<Option<CurveRecord>> = pairs
        .par_iter()
        .map(|&[i, j]| {
            let seeds = strided(&common_points(&surfaces[i], &surfaces[j], eps2), MAX_SEEDS);
            let samples =
                intersect_surfaces(&surfaces[i].primitive, &surfaces[j].primitive, &seeds).ok()?;
            let pts: Vec<Vec3> = samples.iter().map(|s| s.point).collect();
            // Samples are exact only to the intersection tolerance, so smaller rms
            // gains do not justify a later kind.
            let fit = fit_best_curve_within(&pts, INTERSECTION_TOL).ok()?;
            (fit.rms_error < CURVE_ACCEPT_FACTOR * eps1).then(|| CurveRecord {
                primitive: fit.curve().expect("curve fit").clone(),
                rms: fit.rms_error,
                parents: vec![i, j],
                cell: None,
                points: pts,
            })
        })
        .collect();
    let mut candidates: Vec<CurveRecord> = born.into_iter().flatten().collect();
    for mut c in cell_curves {
        let cell = c.cell.expect("cell curve");
        c.parents = surfaces
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                adjacency.get(cell, s.cell) && median_distance(&s.primitive, &c.points) < eps2
            })
            .map(|(k, _)| k)
            .collect();
        c.parents.dedup();
        if !c.parents.is_empty() {
            candidates.push(c);
        }
    }
    candidates.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let mut kept: Vec<CurveRecord> = Vec::new();
    for c in candidates {
        match kept.iter_mut().find(|k| curve_gap(k, &c) < eps3 / 2.0) {
            Some(k) => {
                merge_sorted(&mut k.parents, &c.parents);
                if c.rms < k.rms {
                    k.primitive = c.primitive;
                    k.rms = c.rms;
                    k.cell = c.cell;
                }
                k.points.extend(c.points);
            }
            None => kept.push(c),
        }
    }
    kept.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let mut fe = BoolMatrix::new(surfaces.len(), kept.len());
    for (e, c) in kept.iter().enumerate() {
        for &k in &c.parents {
            fe.set(k, e, true);
        }
    }
    (kept, fe)
}

/// EE: curves sharing a surface whose samples come within `eps3`.
pub fn build_curve_adjacency(curves: &[CurveRecord], fe: &BoolMatrix, eps3: f64) -> BoolMatrix {
    let n = curves.len();
    let trees: Vec<KdTree> = curves
        .par_iter()
        .map(|c| KdTree::from_vecs(&c.points))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let hits: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| {
            (0..fe.rows()).any(|k| fe.get(k, i) && fe.get(k, j))
                && min_cross_distance(&curves[i].points, &trees[j]) < eps3
        })
        .collect();
    let mut ee = BoolMatrix::new(n, n);
    for (&(i, j), hit) in pairs.iter().zip(hits) {
        if hit {
            ee.set_symmetric(i, j);
        }
    }
    ee
}

/// Closest approach of two curves by alternating projection from `seed`;
/// returns the midpoint and the gap.
fn closest_approach(a: &CurvePrimitive, b: &CurvePrimitive, seed: Vec3) -> (Vec3, f64) {
    let mut x = seed;
    let (mut pa, mut pb) = (a.closest_point(&x), b.closest_point(&x));
    for _ in 0..CURVE_PROJECTION_ROUNDS {
        pa = a.closest_point(&x);
        pb = b.closest_point(&pa);
        let next = a.closest_point(&pb);
        let moved = (next - pa).norm();
        x = pb;
        if moved < 1e-14 {
            break;
        }
    }
    ((pa + pb) / 2.0, (pa - pb).norm())
}

/// Candidate vertex of one curve pair: closest-approach points from the
/// sample pairs with the smallest gaps, accepted below `eps3`, scored by
/// the summed distance to both sample sets.
fn pair_vertex(
    a: &CurveRecord,
    b: &CurveRecord,
    tree_a: &KdTree,
    tree_b: &KdTree,
    eps3: f64,
) -> Option<Vec3> {
    let mut gaps: Vec<(f64, usize, usize)> =
        strided(&(0..a.points.len()).collect::<Vec<_>>(), MAX_SEEDS)
            .into_iter()
            .filter_map(|i| {
                let p = a.points[i];
                tree_b.nearest(&[p.x, p.y, p.z]).map(|(j, d2)| (d2, i, j))
            })
            .collect();
    gaps.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let score = |v: &Vec3| {
        let q = [v.x, v.y, v.z];
        tree_a.nearest(&q).map_or(f64::INFINITY, |(_, d)| d.sqrt())
            + tree_b.nearest(&q).map_or(f64::INFINITY, |(_, d)| d.sqrt())
    };
    let mut best: Option<(f64, Vec3)> = None;
    for &(_, i, j) in gaps.iter().take(VERTEX_SEEDS) {
        let seed = (a.points[i] + b.points[j]) / 2.0;
        let (v, gap) = closest_approach(&a.primitive, &b.primitive, seed);
        if !(gap < eps3) || !v.iter().all(|c| c.is_finite()) {
            continue;
        }
        let s = score(&v);
        if best.is_none_or(|(bs, _)| s < bs) {
            best = Some((s, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Vertices, EV and FV. Candidates from every EE pair are sorted by
/// (lower curve index, position) and merged greedily into clusters whose
/// running mean is within `eps3 / 2`; each vertex is its cluster mean.
pub fn extract_vertices(
    curves: &[CurveRecord],
    ee: &BoolMatrix,
    fe: &BoolMatrix,
    eps3: f64,
) -> (Vec<Vec3>, BoolMatrix, BoolMatrix) {
    let trees: Vec<KdTree> = curves
        .par_iter()
        .map(|c| KdTree::from_vecs(&c.points))
        .collect();
    let pairs: Vec<[usize; 2]> = ee.ones().into_iter().filter(|[i, j]| i < j).collect();
    let found: Vec<Option<(usize, usize, Vec3)>> = pairs
        .par_iter()
        .map(|&[i, j]| {
            pair_vertex(&curves[i], &curves[j], &trees[i], &trees[j], eps3).map(|v| (i, j, v))
        })
        .collect();
    let mut candidates: Vec<(usize, usize, Vec3)> = found.into_iter().flatten().collect();
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(lex_cmp(&a.2, &b.2)).then(a.1.cmp(&b.1)));
    // (sum of positions, count, curves)
    let mut clusters: Vec<(Vec3, usize, Vec<usize>)> = Vec::new();
    for (i, j, v) in candidates {
        match clusters
            .iter_mut()
            .find(|(sum, n, _)| (sum / *n as f64 - v).norm() < eps3 / 2.0)
        {
            Some((sum, n, ids)) => {
                *sum += v;
                *n += 1;
                merge_sorted(ids, &[i, j]);
            }
            None => clusters.push((v, 1, vec![i, j])),
        }
    }
    let mut verts: Vec<(Vec3, Vec<usize>)> = clusters
        .into_iter()
        .map(|(sum, n, ids)| (sum / n as f64, ids))
        .collect();
    verts.sort_by(|a, b| a.1[0].cmp(&b.1[0]).then(lex_cmp(&a.0, &b.0)));
    let mut ev = BoolMatrix::new(curves.len(), verts.len());
    let mut fv = BoolMatrix::new(fe.rows(), verts.len());
    for (v, (_, ids)) in verts.iter().enumerate() {
        for &e in ids {
            ev.set(e, v, true);
            for f in 0..fe.rows() {
                if fe.get(f, e) {
                    fv.set(f, v, true);
                }
            }
        }
    }
    (verts.into_iter().map(|(p, _)| p).collect(), ev, fv)
}

/// Violations of the model invariants; empty for a consistent model.
pub fn check_brep(m: &BRepModel, eps3: f64) -> Vec<String> {
    let (nv, ne, nf) = m.counts();
    let mut out = Vec::new();
    for (name, mat, rows, cols) in [
        ("FF", &m.ff, nf, nf),
        ("FE", &m.fe, nf, ne),
        ("EE", &m.ee, ne, ne),
        ("EV", &m.ev, ne, nv),
        ("FV", &m.fv, nf, nv),
    ] {
        if mat.rows() != rows || mat.cols() != cols {
            out.push(format!(
                "{name} is {}x{}, expected {rows}x{cols}",
                mat.rows(),
                mat.cols()
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (name, mat) in [("FF", &m.ff), ("EE", &m.ee)] {
        for [i, j] in mat.ones() {
            if i == j {
                out.push(format!("{name}({i},{i}) on the diagonal"));
            } else if !mat.get(j, i) {
                out.push(format!("{name}({i},{j}) without {name}({j},{i})"));
            }
        }
    }
    for [e, v] in m.ev.ones() {
        let d = m.curves[e].geometry.distance(&m.vertices[v]);
        if !(d <= eps3) {
            out.push(format!("EV({e},{v}): vertex is {d:.3e} from the curve"));
        }
    }
    for e in 0..ne {
        if m.fe.col_degree(e) == 0 {
            out.push(format!("curve {e} has no surface"));
        }
    }
    out
}

/// Checks the model and returns it, or the list of violations.
pub fn assemble_brep(
    vertices: Vec<Vec3>,
    curves: Vec<Edge>,
    surfaces: Vec<Face>,
    matrices: [BoolMatrix; 5],
    eps3: f64,
) -> Result<BRepModel, TopologyError> {
    let [ff, fe, ee, ev, fv] = matrices;
    let m = BRepModel {
        vertices,
        curves,
        surfaces,
        ff,
        fe,
        ee,
        ev,
        fv,
    };
    let violations = check_brep(&m, eps3);
    if violations.is_empty() {
        Ok(m)
    } else {
        Err(TopologyError::InconsistentTopology(violations))
    }
}

/// Output of the topology stages plus the supporting samples.
#[derive(Debug, Clone)]
pub struct Recovered {
    pub model: BRepModel,
    pub surfaces: Vec<SurfaceRecord>,
    pub curves: Vec<CurveRecord>,
    pub warnings: Vec<String>,
}

/// Runs the topology stages on fitted cells and assembles the model. Face
/// extents cover the cell points and the samples of incident curves. A
/// model that fails its invariants is still returned, with the violations
/// as warnings.
pub fn recover(
    adjacency: &BoolMatrix,
    fits: &[CellFit],
    cell_points: &CellPoints,
    eps1: f64,
    eps2: f64,
    eps3: f64,
) -> Recovered {
    let roles = cell_roles(fits);
    let surfaces = collect_surfaces(fits, cell_points, eps1);
    let ff = build_surface_adjacency(adjacency, &roles, &surfaces, eps2);
    let (curves, fe) = extract_curves(
        &surfaces,
        &ff,
        collect_cell_curves(fits, cell_points),
        adjacency,
        eps1,
        eps2,
        eps3,
    );
    let ee = build_curve_adjacency(&curves, &fe, eps3);
    let (vertices, ev, fv) = extract_vertices(&curves, &ee, &fe, eps3);
    let faces = surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut support = s.points.clone();
            for (e, c) in curves.iter().enumerate() {
                if fe.get(i, e) {
                    support.extend_from_slice(&c.points);
                }
            }
            Face::bounded(s.primitive.clone(), &support)
        })
        .collect();
    let edges = curves
        .iter()
        .map(|c| Edge::bounded(c.primitive.clone(), &c.points))
        .collect();
    let model = BRepModel {
        vertices,
        curves: edges,
        surfaces: faces,
        ff,
        fe,
        ee,
        ev,
        fv,
    };
    let warnings = check_brep(&model, eps3);
    Recovered {
        model,
        surfaces,
        curves,
        warnings,
    }
}
