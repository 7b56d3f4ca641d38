//! Exact sufficient statistics, their ℓ₂-sensitivity and tempering scale.

use crate::model::{vech_len, Dataset, SufficientStatistic};
use crate::{Error, Result};
use alloc::vec;

pub fn compute_ss(data: &Dataset) -> SufficientStatistic {
    let d = data.dim();
    let mut yy = 0.0;
    let mut xy = vec![0.0; d];
    let mut xx = vec![0.0; vech_len(d)];
    for (x, y) in data.rows() {
        yy += y * y;
        let mut k = 0;
        for i in 0..d {
            xy[i] += x[i] * y;
            for j in i..d {
                xx[k] += x[i] * x[j];
                k += 1;
            }
        }
    }
    SufficientStatistic::new(yy, xy, xx, data.len() as f64).expect("finite clipped data")
}

/// Replace-one ℓ₂-sensitivity bound in the vech layout:
/// `2·sqrt(By⁴ + Bx²By² + Bx⁴)`, twice the largest single-point statistic
/// norm. With `‖x‖ ≤ Bx` the vech part has norm at most `‖x‖²`, so the bound
/// does not grow with `d`.
pub fn sensitivity_bound(d: usize, input_bound: f64, output_bound: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::arg("dimension must be at least 1"));
    }
    if !(input_bound >= 0.0) || !(output_bound >= 0.0) {
        return Err(Error::arg("bounds must be non-negative"));
    }
    let (bx2, by2) = (input_bound * input_bound, output_bound * output_bound);
    Ok(2.0 * libm::sqrt(by2 * by2 + bx2 * by2 + bx2 * bx2))
}

/// Every entry and the count multiplied by `kappa ∈ [0, 1]`.
pub fn scale_ss(ss: &SufficientStatistic, kappa: f64) -> Result<SufficientStatistic> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::Argument(alloc::format!(
            "kappa {kappa} outside [0, 1]"
        )));
    }
    Ok(ss.scaled(kappa))
}
