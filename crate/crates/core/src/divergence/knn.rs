use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::kdtree::{KdTree, Nearest};
use crate::model::ThetaSampleSet;
use crate::{Error, Result};

pub const DEFAULT_K: usize = 4;
/// Largest neighbour order tried before a point is dropped.
pub const MAX_K: usize = 32;

/// Diagnostics of one kNN estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnEstimate {
    /// Unclamped estimate.
    pub value: f64,
    /// Points whose neighbour order had to grow past `k`.
    pub escalated: usize,
    /// Points dropped because distances stayed zero up to [`MAX_K`].
    pub dropped: usize,
    /// Whether the pooled covariance was singular and only the diagonal
    /// was used for whitening.
    pub diagonal_whitening: bool,
}

/// kNN estimate of `KL(p ‖ q)` from row-major point sets `p` and `q` of
/// dimension `dim`:
/// `(D/m) Σ_i ln(δ_q(i)/δ_p(i)) + ln(m/(m−1))` where `δ_p(i)` is the
/// distance from `p_i` to its k-th neighbour in `p` without itself and
/// `δ_q(i)` the one in `q`.
///
/// The larger set is truncated to the size `m` of the smaller. Both sets
/// are whitened jointly by the pooled mean and covariance, which makes the
/// estimate invariant under a shared affine map. Where a k-th distance is
/// zero, k grows for that point up to [`MAX_K`].
pub fn knn_kl_points(p: &[f64], q: &[f64], dim: usize, k: usize) -> Result<KnnEstimate> {
    if dim == 0 || p.len() % dim != 0 || q.len() % dim != 0 {
        return Err(Error::arg("point arrays do not match the dimension"));
    }
    if k == 0 || k > MAX_K {
        return Err(Error::Argument(format!("k = {k} outside 1..={MAX_K}")));
    }
    let m = (p.len() / dim).min(q.len() / dim);
    if m < k + 1 {
        return Err(Error::Argument(format!(
            "need at least {} samples per set, got {m}",
            k + 1
        )));
    }
    let (p, q) = (&p[..m * dim], &q[..m * dim]);
    let (wp, wq, diagonal_whitening) = whiten(p, q, dim);
    let tp = KdTree::new(&wp, dim);
    let tq = KdTree::new(&wq, dim);
    let mut np = Nearest::new(k);
    let mut nq = Nearest::new(k);
    let mut sum = 0.0;
    let (mut used, mut escalated, mut dropped) = (0usize, 0usize, 0usize);
    for i in 0..m {
        let x = &wp[i * dim..(i + 1) * dim];
        let mut kk = k;
        let term = loop {
            tp.knn(x, kk, Some(i), &mut np);
            tq.knn(x, kk, None, &mut nq);
            match (np.kth(kk), nq.kth(kk)) {
                (Some(dp), Some(dq)) if dp > 0.0 && dq > 0.0 => break Some(libm::log(dq / dp)),
                _ if kk < MAX_K && kk < m - 1 => kk += 1,
                _ => break None,
            }
        };
        if kk > k {
            escalated += 1;
        }
        match term {
            Some(t) => {
                sum += t;
                used += 1;
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("knn_kl: dropped {dropped} of {m} points with zero neighbour distances");
    }
    if used == 0 {
        return Err(Error::Numerical(
            "every point has coincident neighbours".into(),
        ));
    }
    let value = dim as f64 * sum / used as f64 + libm::log(m as f64 / (m as f64 - 1.0));
    Ok(KnnEstimate {
        value,
        escalated,
        dropped,
        diagonal_whitening,
    })
}

/// Whitened copies of `p` and `q` under the pooled mean and covariance.
fn whiten(p: &[f64], q: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>, bool) {
    let n = (p.len() + q.len()) / dim;
    let mut mean = DVector::<f64>::zeros(dim);
    for row in p.chunks_exact(dim).chain(q.chunks_exact(dim)) {
        for (a, v) in row.iter().enumerate() {
            mean[a] += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for row in p.chunks_exact(dim).chain(q.chunks_exact(dim)) {
        for a in 0..dim {
            let da = row[a] - mean[a];
            for b in a..dim {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            cov[(a, b)] /= (n - 1) as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let (transform, diagonal) = match nalgebra::Cholesky::new(cov.clone()) {
        Some(c) => {
            let linv = c
                .l()
                .solve_lower_triangular(&DMatrix::identity(dim, dim))
                .expect("Cholesky factor is invertible");
            (linv, false)
        }
        None => {
            log::warn!("knn_kl: pooled covariance is singular; using diagonal whitening");
            let diag = DVector::from_fn(dim, |a, _| {
                let v = cov[(a, a)];
                if v > 0.0 {
                    1.0 / libm::sqrt(v)
                } else {
                    1.0
                }
            });
            (DMatrix::from_diagonal(&diag), true)
        }
    };
    // `transform` is lower triangular in both branches.
    let apply = |pts: &[f64]| {
        let mut out = Vec::with_capacity(pts.len());
        for row in pts.chunks_exact(dim) {
            for a in 0..dim {
                let mut acc = 0.0;
                for b in 0..=a {
                    acc += transform[(a, b)] * (row[b] - mean[b]);
                }
                out.push(acc);
            }
        }
        out
    };
    (apply(p), apply(q), diagonal)
}

/// Unclamped `KL(post ‖ prior)` estimate on `(w, ln σ²)`.
pub fn knn_kl_raw(post: &ThetaSampleSet, prior: &ThetaSampleSet, k: usize) -> Result<f64> {
    if post.dim() != prior.dim() {
        return Err(Error::arg("sample sets differ in dimension"));
    }
    Ok(knn_kl_points(&post.points(), &prior.points(), post.dim() + 1, k)?.value)
}

/// [`knn_kl_raw`] clamped at 0.
pub fn knn_kl(post: &ThetaSampleSet, prior: &ThetaSampleSet, k: usize) -> Result<f64> {
    Ok(knn_kl_raw(post, prior, k)?.max(0.0))
}
