use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::model::{vech_len, SufficientStatistic, ThetaSample};

/// Mean and covariance of one datum's statistic vector `(y², x·y, vech(xxᵀ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair {
    pub mu_g: DVector<f64>,
    pub sigma_g: DMatrix<f64>,
}

/// Index pairs into `z = (x, y)` whose products form the statistic vector.
pub(crate) fn product_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(1 + d + vech_len(d));
    pairs.push((d, d));
    for i in 0..d {
        pairs.push((i, d));
    }
    for i in 0..d {
        for j in i..d {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Closed-form moments of the per-datum statistic under `x ~ N(μ, Σ)`,
/// `y = wᵀx + N(0, σ²)`.
///
/// `z = (x, y)` is jointly Gaussian with mean `m = (μ, wᵀμ)` and covariance
/// `C = [[Σ, Σw], [wᵀΣ, wᵀΣw + σ²]]`. Every statistic entry is a product
/// `z_a z_b`, so by Isserlis' theorem
/// `E[z_a z_b] = C_ab + m_a m_b` and
/// `Cov(z_a z_b, z_c z_d) = C_ac C_bd + C_ad C_bc + m_a m_c C_bd + m_a m_d C_bc
///  + m_b m_c C_ad + m_b m_d C_ac`.
pub fn ss_moments(theta: &ThetaSample, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> MomentPair {
    let d = theta.dim();
    let pairs = product_pairs(d);
    let mut out = MomentPair {
        mu_g: DVector::zeros(pairs.len()),
        sigma_g: DMatrix::zeros(pairs.len(), pairs.len()),
    };
    moments_into(theta.w(), theta.sigma2(), mu, sigma, &pairs, &mut out);
    out
}

pub(crate) fn moments_into(
    w: &[f64],
    sigma2: f64,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    pairs: &[(usize, usize)],
    out: &mut MomentPair,
) {
    let d = w.len();
    let n = d + 1;
    let mut m = [0.0f64; 16];
    let mut c = [0.0f64; 256];
    debug_assert!(n <= 16 && pairs.len() == SufficientStatistic::stat_len(d));
    let wv = DVector::from_column_slice(w);
    let sw = sigma * &wv;
    for i in 0..d {
        m[i] = mu[i];
        for j in 0..d {
            c[i * n + j] = sigma[(i, j)];
        }
        c[i * n + d] = sw[i];
        c[d * n + i] = sw[i];
    }
    m[d] = wv.dot(mu);
    c[d * n + d] = wv.dot(&sw) + sigma2;
    let cc = |a: usize, b: usize| c[a * n + b];
    for (k, &(a, b)) in pairs.iter().enumerate() {
        out.mu_g[k] = cc(a, b) + m[a] * m[b];
        for (l, &(e, f)) in pairs.iter().enumerate().skip(k) {
            let v = cc(a, e) * cc(b, f)
                + cc(a, f) * cc(b, e)
                + m[a] * m[e] * cc(b, f)
                + m[a] * m[f] * cc(b, e)
                + m[b] * m[e] * cc(a, f)
                + m[b] * m[f] * cc(a, e);
            out.sigma_g[(k, l)] = v;
            out.sigma_g[(l, k)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn standard_cases() {
        let one = DVector::from_element(1, 0.0);
        let unit = DMatrix::identity(1, 1);
        let mp = ss_moments(&ThetaSample::new(vec![0.0], 1.0).unwrap(), &one, &unit);
        assert_eq!(mp.mu_g.as_slice(), &[1.0, 0.0, 1.0]);
        assert_eq!(
            mp.sigma_g,
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 2.0]))
        );

        let mp = ss_moments(&ThetaSample::new(vec![1.0], 1.0).unwrap(), &one, &unit);
        assert_eq!(mp.mu_g.as_slice(), &[2.0, 1.0, 1.0]);
        // y ~ N(0, 2), xy with Cov(x, y) = 1: Var(y²) = 8, Var(xy) = 1·2 + 1 = 3,
        // Var(x²) = 2, Cov(y², xy) = 2·2·1 = 4, Cov(y², x²) = 2, Cov(xy, x²) = 2.
        let expect = DMatrix::from_row_slice(3, 3, &[8.0, 4.0, 2.0, 4.0, 3.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(mp.sigma_g, expect);
    }

    #[test]
    fn degenerate_point_mass() {
        let th = ThetaSample::new(vec![0.0, 0.0], f64::MIN_POSITIVE).unwrap();
        let mp = ss_moments(&th, &DVector::zeros(2), &DMatrix::zeros(2, 2));
        assert!(mp.mu_g.abs().max() < 1e-300);
        assert!(mp.sigma_g.abs().max() < 1e-300);
    }

    #[test]
    fn layout_matches_statistic() {
        assert_eq!(
            product_pairs(2),
            vec![(2, 2), (0, 2), (1, 2), (0, 0), (0, 1), (1, 1)]
        );
    }
}
