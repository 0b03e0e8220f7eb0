//! Exact k-nearest-neighbor distance tables.
//!
//! Two interchangeable backends answer the same query: a brute-force scan
//! (the default; groups are small) and a k-d tree for large single-group
//! baselines. Both order candidates by `(squared distance, index)` so they
//! return bit-identical tables.

use super::{require_samples, sq_dist, EntropyError};
use crate::features::FeatureSet;

/// `T x k` matrix of neighbor distances; row `t` is ascending and excludes `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnTable {
    k: usize,
    dist: Vec<f64>,
}

impl KnnTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.dist.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Distances from sample `t` to its 1st..kth neighbors.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.dist[t * self.k..(t + 1) * self.k]
    }

    /// Distance from `t` to its `j`th neighbor (1-based).
    #[inline]
    pub fn nth(&self, t: usize, j: usize) -> f64 {
        self.dist[t * self.k + j - 1]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.dist.chunks_exact(self.k)
    }
}

/// Bounded, sorted candidate list of `(squared distance, index)`.
struct Best {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, idx: usize) {
        if self.items.len() == self.k {
            let (wd, wi) = self.items[self.k - 1];
            if d2 > wd || (d2 == wd && idx > wi) {
                return;
            }
        }
        let pos = self.items.partition_point(|&(d, i)| d < d2 || (d == d2 && i < idx));
        self.items.insert(pos, (d2, idx));
        self.items.truncate(self.k);
    }
}

/// k-nearest-neighbor distances by exhaustive scan.
pub fn knn_distances(x: &FeatureSet, k: usize) -> Result<KnnTable, EntropyError> {
    check(x, k)?;
    let t_len = x.len();
    let mut dist = Vec::with_capacity(t_len * k);
    let mut best = Best::new(k);
    for t in 0..t_len {
        best.items.clear();
        let p = x.row(t);
        for (j, q) in x.rows().enumerate() {
            if j != t {
                let d2 = sq_dist(p, q);
                if d2 <= best.worst() {
                    best.offer(d2, j);
                }
            }
        }
        dist.extend(best.items.iter().map(|&(d2, _)| d2.sqrt()));
    }
    Ok(KnnTable { k, dist })
}

/// Same table as [`knn_distances`], answered with a k-d tree.
pub fn knn_distances_kdtree(x: &FeatureSet, k: usize) -> Result<KnnTable, EntropyError> {
    check(x, k)?;
    let tree = KdTree::build(x);
    let mut dist = Vec::with_capacity(x.len() * k);
    for t in 0..x.len() {
        dist.extend(tree.query(x.row(t), k, Some(t)).into_iter().map(|(d2, _)| d2.sqrt()));
    }
    Ok(KnnTable { k, dist })
}

pub(crate) fn knn_table(x: &FeatureSet, k: usize, use_kdtree: bool) -> Result<KnnTable, EntropyError> {
    if use_kdtree {
        knn_distances_kdtree(x, k)
    } else {
        knn_distances(x, k)
    }
}

fn check(x: &FeatureSet, k: usize) -> Result<(), EntropyError> {
    if k == 0 {
        return Err(EntropyError::InvalidParameter("k must be at least 1".into()));
    }
    require_samples(x, k + 1)
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static k-d tree over the rows of a [`FeatureSet`], split at the median of
/// the widest axis.
pub struct KdTree<'a> {
    points: &'a FeatureSet,
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a FeatureSet) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = Self::build_node(points, &mut order, 0);
        Self { points, order, root }
    }

    fn build_node(points: &FeatureSet, idx: &mut [usize], offset: usize) -> Node {
        if idx.len() <= LEAF_SIZE {
            return Node::Leaf { start: offset, end: offset + idx.len() };
        }
        let dim = points.dim();
        let mut best_axis = 0;
        let mut best_spread = -1.0;
        for a in 0..dim {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points.row(i)[a];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_axis = a;
            }
        }
        if best_spread <= 0.0 {
            return Node::Leaf { start: offset, end: offset + idx.len() };
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points.row(a)[best_axis].total_cmp(&points.row(b)[best_axis])
        });
        let value = points.row(idx[mid])[best_axis];
        let (l, r) = idx.split_at_mut(mid);
        Node::Split {
            axis: best_axis,
            value,
            left: Box::new(Self::build_node(points, l, offset)),
            right: Box::new(Self::build_node(points, r, offset + mid)),
        }
    }

    /// The `k` nearest rows to `q` as `(squared distance, index)`, ascending,
    /// optionally skipping one index.
    pub fn query(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut best = Best::new(k);
        self.search(&self.root, q, exclude, &mut best);
        best.items
    }

    fn search(&self, node: &Node, q: &[f64], exclude: Option<usize>, best: &mut Best) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if Some(i) != exclude {
                        let d2 = sq_dist(q, self.points.row(i));
                        if d2 <= best.worst() {
                            best.offer(d2, i);
                        }
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                // left holds coordinates <= value, right holds >= value
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, best);
                if diff * diff <= best.worst() {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }
}
