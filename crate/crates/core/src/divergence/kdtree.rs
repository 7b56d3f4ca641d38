//! Exact k-nearest-neighbour search over a flat row-major point array.

use alloc::vec::Vec;

const LEAF: usize = 12;
const NONE: usize = usize::MAX;

struct Node {
    lo: usize,
    hi: usize,
    axis: usize,
    split: f64,
    left: usize,
    right: usize,
}

pub(crate) struct KdTree<'a> {
    pts: &'a [f64],
    dim: usize,
    idx: Vec<usize>,
    nodes: Vec<Node>,
}

/// Up to `cap` smallest squared distances, ascending.
pub(crate) struct Nearest {
    cap: usize,
    d2: Vec<f64>,
}

impl Nearest {
    pub(crate) fn new(cap: usize) -> Self {
        Nearest {
            cap,
            d2: Vec::with_capacity(cap + 1),
        }
    }

    fn clear(&mut self, cap: usize) {
        self.cap = cap;
        self.d2.clear();
    }

    fn worst(&self) -> f64 {
        if self.d2.len() < self.cap {
            f64::INFINITY
        } else {
            self.d2[self.cap - 1]
        }
    }

    fn offer(&mut self, d2: f64) {
        if d2 >= self.worst() {
            return;
        }
        let pos = self.d2.partition_point(|v| *v <= d2);
        self.d2.insert(pos, d2);
        self.d2.truncate(self.cap);
    }

    /// Distance (not squared) to the `k`-th neighbour, 1-based.
    pub(crate) fn kth(&self, k: usize) -> Option<f64> {
        self.d2.get(k - 1).map(|v| libm::sqrt(*v))
    }
}

impl<'a> KdTree<'a> {
    pub(crate) fn new(pts: &'a [f64], dim: usize) -> Self {
        let n = pts.len() / dim;
        let mut tree = KdTree {
            pts,
            dim,
            idx: (0..n).collect(),
            nodes: Vec::with_capacity(2 * n / LEAF + 1),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    fn coord(&self, i: usize, a: usize) -> f64 {
        self.pts[i * self.dim + a]
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            axis: 0,
            split: 0.0,
            left: NONE,
            right: NONE,
        });
        if hi - lo <= LEAF {
            return id;
        }
        let mut axis = 0;
        let mut spread = -1.0;
        for a in 0..self.dim {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.idx[lo..hi] {
                let v = self.coord(i, a);
                mn = mn.min(v);
                mx = mx.max(v);
            }
            if mx - mn > spread {
                spread = mx - mn;
                axis = a;
            }
        }
        let mid = (lo + hi) / 2;
        let (pts, dim) = (self.pts, self.dim);
        self.idx[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a * dim + axis].total_cmp(&pts[b * dim + axis])
        });
        let split = self.coord(self.idx[mid], axis);
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        let node = &mut self.nodes[id];
        node.axis = axis;
        node.split = split;
        node.left = left;
        node.right = right;
        id
    }

    /// Fill `out` with the `k` nearest squared distances to `q`, skipping
    /// point `exclude`.
    pub(crate) fn knn(&self, q: &[f64], k: usize, exclude: Option<usize>, out: &mut Nearest) {
        out.clear(k);
        if !self.nodes.is_empty() {
            self.search(0, q, exclude.unwrap_or(NONE), out);
        }
    }

    fn search(&self, id: usize, q: &[f64], exclude: usize, out: &mut Nearest) {
        let node = &self.nodes[id];
        if node.left == NONE {
            for &i in &self.idx[node.lo..node.hi] {
                if i == exclude {
                    continue;
                }
                let p = &self.pts[i * self.dim..(i + 1) * self.dim];
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                out.offer(d2);
            }
            return;
        }
        let diff = q[node.axis] - node.split;
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, q, exclude, out);
        if diff * diff <= out.worst() {
            self.search(far, q, exclude, out);
        }
    }
}
