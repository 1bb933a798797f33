//! Static k-d tree over 3D points.
//!
//! Nearest-neighbor queries return the point minimizing `(squared distance,
//! index)` lexicographically, so results are identical to a brute-force scan
//! that keeps the lowest index among equidistant points.

use crate::geom::Vec3;

const LEAF_SIZE: usize = 8;

/// Rounding allowance on box lower bounds, so exact ties are never pruned.
const PRUNE_SLACK: f64 = 1.0 + 1e-12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

/// Tight bounding box of a node's points.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    #[inline]
    fn dist2(&self, q: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            let o = if q[d] < self.lo[d] {
                self.lo[d] - q[d]
            } else if q[d] > self.hi[d] {
                q[d] - self.hi[d]
            } else {
                0.0
            };
            s += o * o;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<(Node, Bounds)>,
}

#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let mut tree = Self {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        if !tree.points.is_empty() {
            tree.build(0, tree.points.len());
        }
        tree
    }

    pub fn from_vecs(points: &[Vec3]) -> Self {
        Self::new(points.iter().map(|p| [p.x, p.y, p.z]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        self.points[i]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut b = Bounds {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        };
        for &i in &self.order[start..end] {
            for d in 0..3 {
                b.lo[d] = b.lo[d].min(self.points[i][d]);
                b.hi[d] = b.hi[d].max(self.points[i][d]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push((Node::Leaf { start, end }, b));
        if end - start <= LEAF_SIZE {
            return id;
        }
        let dim = (0..3)
            .max_by(|&x, &y| (b.hi[x] - b.lo[x]).total_cmp(&(b.hi[y] - b.lo[y])))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            pts[x][dim].total_cmp(&pts[y][dim]).then(x.cmp(&y))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id].0 = Node::Split { left, right };
        id
    }

    /// Index and squared distance of the nearest point (lowest index on ties).
    pub fn nearest(&self, q: &[f64; 3]) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: usize, q: &[f64; 3], best: &mut (usize, f64)) {
        match self.nodes[node].0 {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(&self.points[i], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { left, right } => {
                let dl = self.nodes[left].1.dist2(q);
                let dr = self.nodes[right].1.dist2(q);
                let order = if dl <= dr {
                    [(left, dl), (right, dr)]
                } else {
                    [(right, dr), (left, dl)]
                };
                for (child, bound) in order {
                    if bound <= best.1 * PRUNE_SLACK {
                        self.nearest_rec(child, q, best);
                    }
                }
            }
        }
    }

    /// The `k` nearest points sorted by `(squared distance, index)`.
    pub fn k_nearest(&self, q: &[f64; 3], k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.points.is_empty() {
            self.knn_rec(0, q, k, &mut heap);
        }
        heap
    }

    fn knn_rec(&self, node: usize, q: &[f64; 3], k: usize, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node].0 {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(&self.points[i], q);
                    let worse = |e: &(usize, f64)| e.1 > d || (e.1 == d && e.0 > i);
                    if out.len() < k || out.last().is_some_and(worse) {
                        let pos = out.partition_point(|e| !worse(e));
                        out.insert(pos, (i, d));
                        out.truncate(k);
                    }
                }
            }
            Node::Split { left, right } => {
                let dl = self.nodes[left].1.dist2(q);
                let dr = self.nodes[right].1.dist2(q);
                let order = if dl <= dr {
                    [(left, dl), (right, dr)]
                } else {
                    [(right, dr), (left, dl)]
                };
                for (child, bound) in order {
                    let worst = if out.len() < k {
                        f64::INFINITY
                    } else {
                        out[k - 1].1
                    };
                    if bound <= worst * PRUNE_SLACK {
                        self.knn_rec(child, q, k, out);
                    }
                }
            }
        }
    }
}

/// Smallest distance between any point of `a` and any point of `b`.
pub fn min_cross_distance(a: &[Vec3], tree_b: &KdTree) -> f64 {
    a.iter()
        .filter_map(|p| tree_b.nearest(&[p.x, p.y, p.z]))
        .map(|(_, d2)| d2)
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[[f64; 3]], q: &[f64; 3]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let pts = vec![
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
        ];
        let t = KdTree::new(pts);
        assert_eq!(t.nearest(&[0.5, 0.0, 0.0]).unwrap().0, 0);
        assert_eq!(t.nearest(&[0.1, 0.0, 0.0]).unwrap().0, 1);
    }

    #[test]
    fn grid_points_with_many_ties() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    pts.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        let t = KdTree::new(pts.clone());
        for q in [[4.5, 4.5, 4.5], [0.5, 3.0, 9.5], [2.0, 2.5, 2.5]] {
            assert_eq!(t.nearest(&q).unwrap(), brute(&pts, &q));
        }
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(
            pts in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..200),
            q in prop::array::uniform3(-0.5f64..1.5),
        ) {
            let t = KdTree::new(pts.clone());
            prop_assert_eq!(t.nearest(&q).unwrap(), brute(&pts, &q));
        }

        #[test]
        fn knn_matches_sorted_scan(
            pts in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..120),
            q in prop::array::uniform3(0.0f64..1.0),
            k in 1usize..12,
        ) {
            let t = KdTree::new(pts.clone());
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, dist2(p, &q))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(t.k_nearest(&q, k), all);
        }
    }
}
