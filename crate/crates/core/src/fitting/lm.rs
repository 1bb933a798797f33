//! Levenberg-Marquardt refinement with central-difference Jacobians.
//!
//! Models expose a local parameterization: `step` applies a small update
//! vector to the current model (unit axes move in their tangent plane), so
//! the solver never sees constrained parameters.

use nalgebra::{DMatrix, DVector};

use crate::geom::Vec3;

pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-10;
const JACOBIAN_STEP: f64 = 1e-7;
const LAMBDA_MAX: f64 = 1e12;

pub trait Model: Clone {
    fn n_params(&self) -> usize;
    /// Appends the residuals of `points` to `out`.
    fn residuals(&self, points: &[Vec3], out: &mut Vec<f64>);
    fn step(&self, delta: &[f64]) -> Self;
    fn is_valid(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NonConvergent,
}

fn cost_of<M: Model>(m: &M, points: &[Vec3], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    m.residuals(points, buf);
    buf.iter().map(|r| r * r).sum()
}

pub fn refine<M: Model>(init: M, points: &[Vec3]) -> (M, Outcome) {
    let n = init.n_params();
    let mut model = init;
    let mut r = Vec::new();
    let mut cost = cost_of(&model, points, &mut r);
    if !cost.is_finite() {
        return (model, Outcome::NonConvergent);
    }
    let mut lambda = 1e-3;
    let (mut rp, mut rm, mut scratch) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..MAX_ITERATIONS {
        if cost == 0.0 {
            return (model, Outcome::Converged);
        }
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        let mut delta = vec![0.0; n];
        for j in 0..n {
            delta[j] = JACOBIAN_STEP;
            rp.clear();
            model.step(&delta).residuals(points, &mut rp);
            delta[j] = -JACOBIAN_STEP;
            rm.clear();
            model.step(&delta).residuals(points, &mut rm);
            delta[j] = 0.0;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * JACOBIAN_STEP);
            }
        }
        let res = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * res;
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => match a.lu().solve(&(-&jtr)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > LAMBDA_MAX {
                            return (model, Outcome::Converged);
                        }
                        continue;
                    }
                },
            };
            let cand = model.step(step.as_slice());
            let c2 = if cand.is_valid() {
                cost_of(&cand, points, &mut scratch)
            } else {
                f64::INFINITY
            };
            if c2 < cost {
                model = cand;
                cost = c2;
                std::mem::swap(&mut r, &mut scratch);
                lambda = (lambda / 10.0).max(1e-12);
                if step.norm() < STEP_TOLERANCE {
                    return (model, Outcome::Converged);
                }
                break;
            }
            if step.norm() < STEP_TOLERANCE {
                // No representable improvement left.
                return (model, Outcome::Converged);
            }
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                return (model, Outcome::Converged);
            }
        }
    }
    (model, Outcome::NonConvergent)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fits `y = a x + b` encoded in the x and y of each point.
    #[derive(Clone)]
    struct Affine([f64; 2]);

    impl Model for Affine {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, points: &[Vec3], out: &mut Vec<f64>) {
            out.extend(points.iter().map(|p| self.0[0] * p.x + self.0[1] - p.y));
        }
        fn step(&self, d: &[f64]) -> Self {
            Affine([self.0[0] + d[0], self.0[1] + d[1]])
        }
    }

    #[test]
    fn recovers_linear_model() {
        let pts: Vec<Vec3> = (0..20)
            .map(|i| Vec3::new(i as f64, 3.0 * i as f64 - 2.0, 0.0))
            .collect();
        let (m, out) = refine(Affine([0.0, 0.0]), &pts);
        assert_eq!(out, Outcome::Converged);
        assert!((m.0[0] - 3.0).abs() < 1e-8 && (m.0[1] + 2.0).abs() < 1e-8);
    }

    #[derive(Clone)]
    struct Circle2([f64; 3]);

    impl Model for Circle2 {
        fn n_params(&self) -> usize {
            3
        }
        fn residuals(&self, points: &[Vec3], out: &mut Vec<f64>) {
            out.extend(
                points
                    .iter()
                    .map(|p| (p.x - self.0[0]).hypot(p.y - self.0[1]) - self.0[2]),
            );
        }
        fn step(&self, d: &[f64]) -> Self {
            Circle2([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
        }
    }

    #[test]
    fn recovers_circle_from_rough_start() {
        let pts: Vec<Vec3> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.157;
                Vec3::new(1.0 + 2.0 * a.cos(), -1.0 + 2.0 * a.sin(), 0.0)
            })
            .collect();
        let (m, out) = refine(Circle2([0.5, 0.0, 1.0]), &pts);
        assert_eq!(out, Outcome::Converged);
        assert!((m.0[0] - 1.0).abs() < 1e-8);
        assert!((m.0[1] + 1.0).abs() < 1e-8);
        assert!((m.0[2] - 2.0).abs() < 1e-8);
    }
}
