//! Predictive utility of a sample-set model.

use alloc::format;

use crate::model::{Dataset, ThetaSampleSet};
use crate::{Error, Result};

/// Gaussian moment match of the posterior predictive at `x*`:
/// `μ̂ = mean(wᵀx*)`, `σ̂² = mean(σ²) + mean((wᵀx*)²) − μ̂²`.
pub fn predictive_moments(samples: &ThetaSampleSet, x_star: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let (mut s1, mut s2, mut noise) = (0.0, 0.0, 0.0);
    for s in samples.iter() {
        let f = s.predict(x_star);
        s1 += f;
        s2 += f * f;
        noise += s.sigma2();
    }
    let mu = s1 / n;
    let spread = (s2 / n - mu * mu).max(0.0);
    (mu, noise / n + spread)
}

/// Mean over the test set of `½(ln(2πσ̂²) + (μ̂ − y*)²/σ̂²)`.
pub fn mnlp(samples: &ThetaSampleSet, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::arg("empty test set"));
    }
    if test.dim() != samples.dim() {
        return Err(Error::arg("test set and samples differ in dimension"));
    }
    let mut total = 0.0;
    for (x, y) in test.rows() {
        let (mu, s2) = predictive_moments(samples, x);
        if !(s2 > 0.0) {
            return Err(Error::Numerical(format!(
                "predictive variance {s2} is not positive"
            )));
        }
        total += 0.5 * (libm::log(2.0 * core::f64::consts::PI * s2) + (mu - y) * (mu - y) / s2);
    }
    Ok(total / test.len() as f64)
}
