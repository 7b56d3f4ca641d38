use alloc::format;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub(crate) type Chol = Cholesky<f64, Dyn>;

/// Mean absolute diagonal, floored so that a zero matrix still gets a
/// usable jitter scale.
fn diag_scale(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1) as f64;
    let s = m.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Cholesky factor, retrying with growing diagonal jitter (relative 1e-10 up
/// to 1e-4). Returns the factor and the jitter actually added.
pub(crate) fn chol_jittered(m: &DMatrix<f64>) -> Result<(Chol, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite matrix entry ({}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = diag_scale(m);
    let mut rel = 1e-10;
    while rel <= 1e-4 {
        let jitter = rel * scale;
        let mut j = m.clone();
        for i in 0..j.nrows() {
            j[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(j) {
            return Ok((c, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "matrix is not positive definite even after jitter (scale {scale:e})"
    )))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn std_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draw from `N(mean, L Lᵀ)` given the lower factor `L`.
pub(crate) fn sample_mvn<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    l: &DMatrix<f64>,
) -> DVector<f64> {
    let z = std_normal_vec(rng, mean.len());
    mean + l * z
}

pub(crate) fn log_det_chol(c: &Chol) -> f64 {
    2.0 * c
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| libm::log(*v))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (c, j) = chol_jittered(&m).unwrap();
        assert!(j > 0.0 && j < 1e-3);
        assert!((c.l() * c.l().transpose() - &m).abs().max() < 1e-3);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(chol_jittered(&m).is_err());
    }
}
