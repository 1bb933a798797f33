//! Small vector helpers shared by the fitting, topology and metric code.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

pub type Vec3 = Vector3<f64>;

#[inline]
pub fn v3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

#[inline]
pub fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Flips `v` so that its first non-negligible component, scanning z, y, x,
/// is positive.
pub fn canonical_direction(v: Vec3) -> Vec3 {
    const TIE: f64 = 1e-12;
    let flip = if v.z.abs() > TIE {
        v.z < 0.0
    } else if v.y.abs() > TIE {
        v.y < 0.0
    } else {
        v.x < 0.0
    };
    if flip {
        -v
    } else {
        v
    }
}

/// Deterministic orthonormal pair spanning the plane orthogonal to unit `n`.
pub fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let mut c = Vec3::zeros();
    for p in points {
        c += p;
    }
    c / points.len().max(1) as f64
}

pub fn covariance(points: &[Vec3], center: &Vec3) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for p in points {
        let d = p - center;
        m += d * d.transpose();
    }
    m / points.len().max(1) as f64
}

/// Eigen-decomposition of a symmetric 3x3 matrix with eigenvalues sorted
/// ascending; column `i` of the returned matrix pairs with value `i`.
pub fn sorted_eigen(m: Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (vals, vecs)
}

/// Point on the line `(point, dir)` closest to the world origin.
pub fn line_foot_from_origin(point: &Vec3, dir: &Vec3) -> Vec3 {
    point - dir * point.dot(dir)
}

pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Lexicographic comparison of two points, used for canonical output order.
pub fn lex_cmp(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}
