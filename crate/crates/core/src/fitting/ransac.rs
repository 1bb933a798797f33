//! Greedy sequential RANSAC over all surface kinds.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::surfaces::estimate_normals;
use super::{fit_surface_with_normals, FitError, FitResult};
use crate::geom::Vec3;
use crate::primitives::SurfaceKind;

pub const RANSAC_ROUNDS: usize = 10;
/// Inlier distance as a multiple of `eps1`.
pub const RANSAC_THRESHOLD_FACTOR: f64 = 5.0;
/// Stop once fewer than this fraction of the points remain.
const REMAINING_FRACTION: f64 = 0.05;
const HYPOTHESES_PER_KIND: usize = 50;
const MIN_POINTS: usize = 10;
/// A later kind must beat the best earlier kind by this fraction of its
/// inliers; under noise a near-flat cylinder otherwise edges out the plane.
const KIND_MARGIN: f64 = 0.02;

fn sample_size(kind: SurfaceKind) -> usize {
    match kind {
        SurfaceKind::Plane => 3,
        SurfaceKind::Sphere => 4,
        SurfaceKind::Cylinder => 8,
        SurfaceKind::Cone => 10,
        SurfaceKind::Torus => 12,
    }
}

fn inliers(fit: &FitResult, points: &[Vec3], pool: &[usize], threshold: f64) -> Vec<usize> {
    let s = fit.surface().expect("surface fit");
    pool.iter()
        .copied()
        .filter(|&i| s.distance(&points[i]) < threshold)
        .collect()
}

fn fit_subset(
    points: &[Vec3],
    normals: &[Vec3],
    idx: &[usize],
    kind: SurfaceKind,
) -> Result<FitResult, FitError> {
    let p: Vec<Vec3> = idx.iter().map(|&i| points[i]).collect();
    let n: Vec<Vec3> = idx.iter().map(|&i| normals[i]).collect();
    fit_surface_with_normals(&p, kind, Some(&n))
}

/// Best hypothesis of one kind by inlier count, refitted on its inliers
/// when that does not lose inliers.
fn best_of_kind(
    points: &[Vec3],
    normals: &[Vec3],
    pool: &[usize],
    kind: SurfaceKind,
    threshold: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(FitResult, Vec<usize>)> {
    let k = sample_size(kind);
    if pool.len() < k {
        return None;
    }
    let mut best: Option<(FitResult, Vec<usize>)> = None;
    for _ in 0..HYPOTHESES_PER_KIND {
        let idx: Vec<usize> = sample(rng, pool.len(), k)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        let Ok(fit) = fit_subset(points, normals, &idx, kind) else {
            continue;
        };
        let inl = inliers(&fit, points, pool, threshold);
        if best.as_ref().is_none_or(|(_, b)| inl.len() > b.len()) {
            best = Some((fit, inl));
        }
    }
    let (hyp, hyp_inliers) = best?;
    if hyp_inliers.len() < k {
        return Some((hyp, hyp_inliers));
    }
    match fit_subset(points, normals, &hyp_inliers, kind) {
        Ok(refit) => {
            let inl = inliers(&refit, points, pool, threshold);
            if inl.len() >= hyp_inliers.len() {
                Some((refit, inl))
            } else {
                Some((hyp, hyp_inliers))
            }
        }
        Err(_) => Some((hyp, hyp_inliers)),
    }
}

/// Extracts surfaces one at a time. Per kind, the hypothesis with the most
/// inliers (distance below `5 * eps1`) is refitted on them; across kinds a
/// later kind wins only with [`KIND_MARGIN`] more inliers. The winner's
/// inliers are then removed. Each member's `rms_error` and
/// `inlier_count` refer to its own inliers.
pub fn ransac_multi(points: &[Vec3], eps1: f64, seed: u64) -> Result<Vec<FitResult>, FitError> {
    let n = points.len();
    if n < MIN_POINTS {
        return Err(FitError::TooFewPoints {
            needed: MIN_POINTS,
            got: n,
        });
    }
    let threshold = RANSAC_THRESHOLD_FACTOR * eps1;
    let normals = estimate_normals(points, 16).ok_or(FitError::NoModelFound)?;
    let min_inliers =
        ((REMAINING_FRACTION * n as f64).ceil() as usize).max(2 * sample_size(SurfaceKind::Torus));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for _ in 0..RANSAC_ROUNDS {
        if (remaining.len() as f64) < REMAINING_FRACTION * n as f64 {
            break;
        }
        let mut best: Option<(FitResult, Vec<usize>)> = None;
        for kind in SurfaceKind::ALL {
            let Some(candidate) =
                best_of_kind(points, &normals, &remaining, kind, threshold, &mut rng)
            else {
                continue;
            };
            let beats = best.as_ref().is_none_or(|(_, bi)| {
                candidate.1.len() as f64 > bi.len() as f64 * (1.0 + KIND_MARGIN)
            });
            if beats {
                best = Some(candidate);
            }
        }
        let Some((fit, members)) = best.filter(|(_, inl)| inl.len() >= min_inliers) else {
            if out.is_empty() {
                return Err(FitError::NoModelFound);
            }
            break;
        };
        let member_points: Vec<Vec3> = members.iter().map(|&i| points[i]).collect();
        let s = fit.surface().expect("surface fit");
        let rms = (member_points
            .iter()
            .map(|p| s.distance(p).powi(2))
            .sum::<f64>()
            / member_points.len() as f64)
            .sqrt();
        out.push(FitResult {
            rms_error: rms,
            inlier_count: members.len(),
            ..fit
        });
        let mut taken = vec![false; n];
        for &i in &members {
            taken[i] = true;
        }
        remaining.retain(|&i| !taken[i]);
    }
    Ok(out)
}
