//! Exact nearest-neighbor search over dataset states with a ball tree.
//!
//! The tree is built once over all states of all trajectories (median split
//! on the widest-spread axis, hypersphere per node) and is immutable after
//! construction, so it can be queried concurrently. Queries are exact:
//! results match a brute-force linear scan, with distance ties broken by
//! ascending [`PointId`].

use crate::dataset::Dataset;
use crate::env::POINT_DIM;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeighborsError {
    #[error("cannot build a ball tree over an empty dataset")]
    EmptyDataset,
    #[error("points length {len} is not a multiple of dim {dim}")]
    RaggedPoints { len: usize, dim: usize },
    #[error("{points} points but {ids} ids")]
    IdMismatch { points: usize, ids: usize },
}

/// Position of a state inside a dataset: trajectory index and step index
/// (step `0..=len`). Ordered lexicographically; the order is the
/// deterministic tie-break for equidistant neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId {
    pub traj: u32,
    pub step: u32,
}

#[derive(Debug, Clone)]
enum NodeKind {
    /// Range into the point permutation.
    Leaf { start: u32, end: u32 },
    Branch { left: u32, right: u32 },
}

#[derive(Debug, Clone)]
struct Node {
    radius: f64,
    kind: NodeKind,
}

/// Immutable exact-kNN index.
#[derive(Debug, Clone)]
pub struct BallTree {
    dim: usize,
    points: Vec<f64>,
    ids: Vec<PointId>,
    /// Permutation of point indices; leaves own contiguous ranges of it.
    order: Vec<u32>,
    nodes: Vec<Node>,
    /// Node centroids, flat, parallel to `nodes`.
    centroids: Vec<f64>,
    leaf_size: usize,
    root: u32,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

impl BallTree {
    /// Builds a tree over explicit points. `points` is row-major `n x dim`.
    pub fn from_points(
        dim: usize,
        points: Vec<f64>,
        ids: Vec<PointId>,
        leaf_size: usize,
    ) -> Result<BallTree, NeighborsError> {
        assert!(dim > 0 && leaf_size > 0);
        if points.is_empty() {
            return Err(NeighborsError::EmptyDataset);
        }
        if !points.len().is_multiple_of(dim) {
            return Err(NeighborsError::RaggedPoints {
                len: points.len(),
                dim,
            });
        }
        let n = points.len() / dim;
        if ids.len() != n {
            return Err(NeighborsError::IdMismatch {
                points: n,
                ids: ids.len(),
            });
        }
        let mut tree = BallTree {
            dim,
            points,
            ids,
            order: (0..n as u32).collect(),
            nodes: Vec::new(),
            centroids: Vec::new(),
            leaf_size,
            root: 0,
        };
        tree.root = tree.build_node(0, n);
        Ok(tree)
    }

    /// Builds a tree over all states of all trajectories in `data`, with
    /// ids `(trajectory index, step index)`.
    pub fn build(data: &Dataset, leaf_size: usize) -> Result<BallTree, NeighborsError> {
        if data.trajectories.is_empty() {
            return Err(NeighborsError::EmptyDataset);
        }
        let n = data.n_states() as usize;
        let mut points = Vec::with_capacity(n * POINT_DIM);
        let mut ids = Vec::with_capacity(n);
        for (ti, traj) in data.trajectories.iter().enumerate() {
            for si in 0..traj.n_states() {
                let s = traj.state_f64(si);
                points.extend_from_slice(&s);
                ids.push(PointId {
                    traj: ti as u32,
                    step: si as u32,
                });
            }
        }
        BallTree::from_points(POINT_DIM, points, ids, leaf_size)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, index: u32) -> &[f64] {
        let i = index as usize * self.dim;
        &self.points[i..i + self.dim]
    }

    fn centroid(&self, node: u32) -> &[f64] {
        let i = node as usize * self.dim;
        &self.centroids[i..i + self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        // Centroid and radius over order[start..end].
        let mut centroid = vec![0.0; self.dim];
        for &pi in &self.order[start..end] {
            for (c, v) in centroid.iter_mut().zip(self.point(pi)) {
                *c += v;
            }
        }
        let count = (end - start) as f64;
        for c in &mut centroid {
            *c /= count;
        }
        let radius = self.order[start..end]
            .iter()
            .map(|&pi| euclidean(&centroid, self.point(pi)))
            .fold(0.0, f64::max);

        let node_idx = self.nodes.len() as u32;
        self.centroids.extend_from_slice(&centroid);
        self.nodes.push(Node {
            radius,
            kind: NodeKind::Leaf {
                start: start as u32,
                end: end as u32,
            },
        });
        if end - start <= self.leaf_size {
            return node_idx;
        }

        // Widest-spread axis, median split.
        let mut best_axis = 0;
        let mut best_spread = -1.0;
        for axis in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &pi in &self.order[start..end] {
                let v = self.point(pi)[axis];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_axis = axis;
            }
        }
        let mid = (start + end) / 2;
        {
            let dim = self.dim;
            let points = std::mem::take(&mut self.points);
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                let va = points[a as usize * dim + best_axis];
                let vb = points[b as usize * dim + best_axis];
                va.partial_cmp(&vb).expect("points must be finite")
            });
            self.points = points;
        }
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[node_idx as usize].kind = NodeKind::Branch { left, right };
        node_idx
    }

    /// Exact k nearest neighbors of `q` by Euclidean distance, excluding
    /// points for which `exclude` returns true. Results are sorted by
    /// ascending `(distance, id)`; if fewer than `k` admissible points
    /// exist, the list is shorter than `k`.
    pub fn query(
        &self,
        q: &[f64],
        k: usize,
        exclude: Option<&dyn Fn(PointId) -> bool>,
    ) -> Vec<(PointId, f64)> {
        self.query_counted(q, k, exclude).0
    }

    /// Like [`BallTree::query`], also returning the number of tree nodes
    /// visited (used to observe sub-linear query cost).
    pub fn query_counted(
        &self,
        q: &[f64],
        k: usize,
        exclude: Option<&dyn Fn(PointId) -> bool>,
    ) -> (Vec<(PointId, f64)>, usize) {
        assert!(k >= 1, "k must be at least 1");
        assert_eq!(q.len(), self.dim, "query dimension mismatch");
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut visited = 0usize;
        self.search(self.root, q, k, exclude, &mut heap, &mut visited);
        let mut results: Vec<(PointId, f64)> =
            heap.into_iter().map(|c| (c.id, c.dist)).collect();
        results.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("distances are finite")
                .then(a.0.cmp(&b.0))
        });
        (results, visited)
    }

    fn search(
        &self,
        node_idx: u32,
        q: &[f64],
        k: usize,
        exclude: Option<&dyn Fn(PointId) -> bool>,
        heap: &mut BinaryHeap<Candidate>,
        visited: &mut usize,
    ) {
        *visited += 1;
        let node = &self.nodes[node_idx as usize];
        let bound = (euclidean(q, self.centroid(node_idx)) - node.radius).max(0.0);
        if heap.len() == k && bound > heap.peek().expect("heap non-empty").dist {
            return;
        }
        match node.kind {
            NodeKind::Leaf { start, end } => {
                for &pi in &self.order[start as usize..end as usize] {
                    let id = self.ids[pi as usize];
                    if exclude.is_some_and(|f| f(id)) {
                        continue;
                    }
                    let dist = euclidean(q, self.point(pi));
                    let cand = Candidate { dist, id };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap non-empty") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            NodeKind::Branch { left, right } => {
                // Visit the nearer child first for tighter pruning.
                let dl = euclidean(q, self.centroid(left));
                let dr = euclidean(q, self.centroid(right));
                let (first, second) = if dl <= dr { (left, right) } else { (right, left) };
                self.search(first, q, k, exclude, heap, visited);
                self.search(second, q, k, exclude, heap, visited);
            }
        }
    }

    /// Verifies the ball invariant: every point of every node lies within
    /// that node's radius of its centroid. Also checks leaf size limits.
    pub fn check_invariants(&self) -> bool {
        self.check_node(self.root)
    }

    fn check_node(&self, node_idx: u32) -> bool {
        let node = &self.nodes[node_idx as usize];
        let (start, end) = self.node_range(node_idx);
        let centroid = self.centroid(node_idx);
        let contained = self.order[start..end]
            .iter()
            .all(|&pi| euclidean(centroid, self.point(pi)) <= node.radius);
        if !contained {
            return false;
        }
        match node.kind {
            NodeKind::Leaf { start, end } => (end - start) as usize <= self.leaf_size,
            NodeKind::Branch { left, right } => self.check_node(left) && self.check_node(right),
        }
    }

    fn node_range(&self, node_idx: u32) -> (usize, usize) {
        match self.nodes[node_idx as usize].kind {
            NodeKind::Leaf { start, end } => (start as usize, end as usize),
            NodeKind::Branch { left, right } => {
                let (s, _) = self.node_range(left);
                let (_, e) = self.node_range(right);
                (s, e)
            }
        }
    }
}

/// Heap entry ordered by `(distance, id)`; the heap keeps the current worst
/// candidate on top.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    id: PointId,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .partial_cmp(&other.dist)
            .expect("distances are finite")
            .then(self.id.cmp(&other.id))
    }
}
