use nalgebra::{DMatrix, DVector};

use crate::linalg::log_det_chol;
use crate::model::NigBelief;
use crate::special::{digamma, ln_gamma};
use crate::{Error, Result};

/// NIG in exponential-family form with statistics
/// `T = (w/σ², wwᵀ/σ², 1/σ², ln σ²)`.
struct Natural {
    eta1: DVector<f64>,
    eta2: DMatrix<f64>,
    eta3: f64,
    eta4: f64,
    log_partition: f64,
}

impl Natural {
    fn of(p: &NigBelief) -> Result<Self> {
        let d = p.dim() as f64;
        let chol = nalgebra::Cholesky::new(p.v().clone())
            .ok_or_else(|| Error::arg("covariance is not positive definite"))?;
        let prec = chol.inverse();
        let eta1 = &prec * p.w_mean();
        let log_partition = 0.5 * d * libm::log(2.0 * core::f64::consts::PI)
            + 0.5 * log_det_chol(&chol)
            - p.a() * libm::log(p.b())
            + ln_gamma(p.a());
        if !log_partition.is_finite() {
            return Err(Error::arg("non-finite log partition"));
        }
        Ok(Natural {
            eta3: -(p.b() + 0.5 * p.w_mean().dot(&eta1)),
            eta1,
            eta2: prec * -0.5,
            eta4: -(p.a() + 1.0 + 0.5 * d),
            log_partition,
        })
    }
}

/// Exact `KL(p ‖ q)` between NIG beliefs as the Bregman divergence of the
/// log partition: `(η_p − η_q)·E_p[T] − B(η_p) + B(η_q)`, with
/// `E_p[T] = (m a/b, V + mmᵀ a/b, a/b, ln b − ψ(a))`.
pub fn nig_kl(p: &NigBelief, q: &NigBelief) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::arg("beliefs differ in dimension"));
    }
    let (np, nq) = (Natural::of(p)?, Natural::of(q)?);
    let ratio = p.a() / p.b();
    let m = p.w_mean();
    let t1 = m * ratio;
    let t2 = p.v() + m * m.transpose() * ratio;
    let t4 = libm::log(p.b()) - digamma(p.a());
    let kl = (&np.eta1 - &nq.eta1).dot(&t1)
        + (&np.eta2 - &nq.eta2).component_mul(&t2).sum()
        + (np.eta3 - nq.eta3) * ratio
        + (np.eta4 - nq.eta4) * t4
        - np.log_partition
        + nq.log_partition;
    if !kl.is_finite() {
        return Err(Error::arg("non-finite divergence"));
    }
    Ok(kl.max(0.0))
}
