use alloc::format;
use nalgebra::{DMatrix, DVector};

use crate::linalg::{chol_jittered, symmetrize};
use crate::{Error, Result};

/// Normalized product `N(μ, P)·N(o, vI)`: covariance `(P⁻¹ + I/v)⁻¹` and mean
/// `cov·(P⁻¹μ + o/v)`, computed in gain form so that a singular `P` is
/// allowed. `P` is regularized by `1e-8·tr(P)/m·I`.
///
/// `v = 0` returns `(o, 0)`; `v = ∞` returns `(μ, P)`.
pub fn gaussian_product(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    obs: &DVector<f64>,
    obs_var: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = prior_mean.len();
    if prior_cov.nrows() != m || prior_cov.ncols() != m || obs.len() != m {
        return Err(Error::arg("gaussian product operands differ in dimension"));
    }
    if !(obs_var >= 0.0) {
        return Err(Error::Argument(format!(
            "observation variance {obs_var} is negative"
        )));
    }
    if obs_var == 0.0 {
        return Ok((obs.clone(), DMatrix::zeros(m, m)));
    }
    if obs_var.is_infinite() {
        return Ok((prior_mean.clone(), prior_cov.clone()));
    }
    let trace = prior_cov.trace();
    if !(trace > 0.0) {
        return Ok((prior_mean.clone(), DMatrix::zeros(m, m)));
    }
    let mut p = prior_cov.clone();
    for i in 0..m {
        p[(i, i)] += 1e-8 * trace / m as f64;
    }
    let mut s = p.clone();
    for i in 0..m {
        s[(i, i)] += obs_var;
    }
    let (chol, _) = chol_jittered(&s)?;
    // K = P S⁻¹, and with both symmetric Kᵀ = S⁻¹P.
    let kt = chol.solve(&p);
    let mean = prior_mean + kt.tr_mul(&(obs - prior_mean));
    let mut cov = &p - kt.tr_mul(&p);
    symmetrize(&mut cov);
    if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite gaussian product".into()));
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn symmetric_product_halves_covariance() {
        let a = DVector::from_vec(vec![1.0, -2.0]);
        let b = DVector::from_vec(vec![3.0, 4.0]);
        let (mean, cov) = gaussian_product(&a, &(DMatrix::identity(2, 2) * 2.0), &b, 2.0).unwrap();
        assert!((mean - DVector::from_vec(vec![2.0, 1.0])).abs().max() < 1e-7);
        assert!((cov - DMatrix::identity(2, 2)).abs().max() < 1e-7);
    }

    #[test]
    fn limits() {
        let a = DVector::from_vec(vec![1.0]);
        let p = DMatrix::identity(1, 1) * 3.0;
        let o = DVector::from_vec(vec![5.0]);
        assert_eq!(
            gaussian_product(&a, &p, &o, f64::INFINITY).unwrap(),
            (a.clone(), p.clone())
        );
        let (mean, cov) = gaussian_product(&a, &p, &o, 0.0).unwrap();
        assert_eq!((mean, cov), (o.clone(), DMatrix::zeros(1, 1)));
        let (mean, _) = gaussian_product(&a, &p, &o, 1e12).unwrap();
        assert!((mean[0] - 1.0).abs() < 1e-10);
        let (mean, cov) = gaussian_product(&a, &DMatrix::zeros(1, 1), &o, 1.0).unwrap();
        assert_eq!((mean, cov), (a, DMatrix::zeros(1, 1)));
    }

    #[test]
    fn matches_information_form() {
        let mu = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let p = DMatrix::from_row_slice(3, 3, &[2.0, 0.4, 0.1, 0.4, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let o = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let v = 0.7;
        let (mean, cov) = gaussian_product(&mu, &p, &o, v).unwrap();
        // reference without the regularizer: direct information form
        let pinv = p.clone().try_inverse().unwrap();
        let info = &pinv + DMatrix::identity(3, 3) / v;
        let c_ref = info.try_inverse().unwrap();
        let m_ref = &c_ref * (&pinv * &mu + &o / v);
        assert!((mean - m_ref).abs().max() < 1e-7);
        assert!((cov - c_ref).abs().max() < 1e-7);
    }
}
