//! Independent reference computations for the test suites. Nothing here
//! calls into the crate under test except for plain data types.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

// ---------------------------------------------------------------- sampling

/// Standard normal pair by Box-Muller.
pub fn normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let (a, b) = normal_pair(rng);
        out.push(a);
        out.push(b);
    }
    out.truncate(n);
    out
}

// ------------------------------------------------------- special functions

/// Lanczos (g = 7, n = 9) log-gamma, |error| < 1e-13 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

// -------------------------------------------------------------- quadrature

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return val;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// NIG log density in d = 1, `σ² ~ IG(a, b)`, `w | σ² ~ N(m, σ²v)`.
pub fn nig_log_pdf_1d(w: f64, s2: f64, m: f64, v: f64, a: f64, b: f64) -> f64 {
    let ln_ig = a * b.ln() - ln_gamma(a) - (a + 1.0) * s2.ln() - b / s2;
    let ln_n =
        -0.5 * (2.0 * std::f64::consts::PI * s2 * v).ln() - (w - m) * (w - m) / (2.0 * s2 * v);
    ln_ig + ln_n
}

/// `KL(p ‖ q)` for d = 1 NIG beliefs `(m, v, a, b)` by nested adaptive
/// quadrature over `z = (w − m_p)/sqrt(σ² v_p)` and `u = ln σ²`.
pub fn nig_kl_quadrature(p: (f64, f64, f64, f64), q: (f64, f64, f64, f64)) -> f64 {
    let (m1, v1, a1, b1) = p;
    // ln σ² under p has mean ln b − ψ(a) and spread about 1/sqrt(a)
    let centre = (b1 / a1).ln();
    let half = 40.0 / a1.sqrt() + 10.0;
    let mut outer = |u: f64| {
        let s2 = u.exp();
        let sd = (s2 * v1).sqrt();
        let mut inner = |z: f64| {
            let w = m1 + sd * z;
            let lp = nig_log_pdf_1d(w, s2, m1, v1, a1, b1);
            let lq = nig_log_pdf_1d(w, s2, q.0, q.1, q.2, q.3);
            // density in (z, u): p(w, σ²)·sd·σ²
            (lp + (sd * s2).ln()).exp() * (lp - lq)
        };
        integrate(&mut inner, -12.0, 12.0, 1e-13)
    };
    integrate(&mut outer, centre - half, centre + half, 1e-11)
}

// ------------------------------------------------------------ Monte Carlo

/// Per-datum statistic vector `(y², x·y, vech(xxᵀ))`.
pub fn stat_vector(x: &[f64], y: f64) -> Vec<f64> {
    let d = x.len();
    let mut v = vec![y * y];
    v.extend(x.iter().map(|xi| xi * y));
    for i in 0..d {
        for j in i..d {
            v.push(x[i] * x[j]);
        }
    }
    v
}

/// Sample mean and covariance of the statistic vector under
/// `x ~ N(mu, L Lᵀ)`, `y = wᵀx + N(0, σ²)`.
pub fn mc_stat_moments<R: Rng>(
    rng: &mut R,
    w: &[f64],
    sigma2: f64,
    mu: &[f64],
    chol_l: &DMatrix<f64>,
    draws: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = w.len();
    let m = 1 + d + d * (d + 1) / 2;
    let mut mean = DVector::<f64>::zeros(m);
    let mut m2 = DMatrix::<f64>::zeros(m, m);
    for n in 1..=draws {
        let z = normals(rng, d + 1);
        let x: Vec<f64> = (0..d)
            .map(|i| mu[i] + (0..=i).map(|j| chol_l[(i, j)] * z[j]).sum::<f64>())
            .collect();
        let y = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + sigma2.sqrt() * z[d];
        let s = DVector::from_vec(stat_vector(&x, y));
        let delta = &s - &mean;
        mean += &delta / n as f64;
        let delta2 = &s - &mean;
        m2 += &delta * delta2.transpose();
    }
    (mean, m2 / (draws - 1) as f64)
}

/// Self-normalized importance-sampling estimate of the mean of the
/// normalized product `N(μ, P)·N(o, vI)`, with proposal `N(o, vI)`.
/// Returns the estimate and its per-coordinate standard error.
pub fn is_product_mean<R: Rng>(
    rng: &mut R,
    mu: &DVector<f64>,
    p: &DMatrix<f64>,
    o: &DVector<f64>,
    v: f64,
    draws: usize,
) -> (DVector<f64>, DVector<f64>) {
    let m = mu.len();
    let pinv = p
        .clone()
        .try_inverse()
        .expect("invertible prior covariance");
    let mut xs = Vec::with_capacity(draws);
    let mut lw = Vec::with_capacity(draws);
    for _ in 0..draws {
        let z = DVector::from_vec(normals(rng, m));
        let x = o + z * v.sqrt();
        let d = &x - mu;
        lw.push(-0.5 * d.dot(&(&pinv * &d)));
        xs.push(x);
    }
    let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - mx).exp()).collect();
    let sw: f64 = w.iter().sum();
    let mut est = DVector::<f64>::zeros(m);
    for (x, wi) in xs.iter().zip(&w) {
        est += x * (*wi / sw);
    }
    // delta-method variance of a ratio estimator
    let mut var = DVector::<f64>::zeros(m);
    for (x, wi) in xs.iter().zip(&w) {
        let d = x - &est;
        var += d.component_mul(&d) * (wi / sw).powi(2);
    }
    (est, var.map(f64::sqrt))
}

// ----------------------------------------------------------------- Shapley

/// Shapley values by averaging marginal contributions over all `n!`
/// orderings (Heap's algorithm).
pub fn shapley_by_permutations(n: usize, value: impl Fn(u32) -> f64) -> Vec<f64> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut phi = vec![0.0; n];
    let mut count = 0usize;
    let mut visit = |perm: &[usize]| {
        let mut mask = 0u32;
        for &i in perm {
            let before = value(mask);
            mask |= 1 << i;
            phi[i] += value(mask) - before;
        }
        count += 1;
    };
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    phi.iter().map(|p| p / count as f64).collect()
}

// --------------------------------------------------------------- tempering

/// Tempered NIG posterior `p(θ) Π p(y_j | x_j, θ)^κ` computed from raw rows:
/// returns `(mean, covariance, a, b)`.
pub fn tempered_posterior_from_rows(
    w0: &DVector<f64>,
    v0: &DMatrix<f64>,
    a0: f64,
    b0: f64,
    rows: &[(Vec<f64>, f64)],
    kappa: f64,
) -> (DVector<f64>, DMatrix<f64>, f64, f64) {
    let lam0 = v0
        .clone()
        .try_inverse()
        .expect("invertible prior covariance");
    let mut prec = lam0.clone();
    let mut h = &lam0 * w0;
    let mut yy = 0.0;
    for (x, y) in rows {
        let xv = DVector::from_column_slice(x);
        prec += &xv * xv.transpose() * kappa;
        h += &xv * (*y * kappa);
        yy += kappa * y * y;
    }
    let cov = prec
        .clone()
        .try_inverse()
        .expect("invertible posterior precision");
    let mean = &cov * &h;
    let a = a0 + 0.5 * kappa * rows.len() as f64;
    let b = b0 + 0.5 * (yy + w0.dot(&(&lam0 * w0)) - mean.dot(&(&prec * &mean)));
    (mean, cov, a, b)
}

/// `KL(N(μ₁, I) ‖ N(μ₂, I))`.
pub fn gaussian_shift_kl(shift: &[f64]) -> f64 {
    0.5 * shift.iter().map(|s| s * s).sum::<f64>()
}

#[cfg(test)]
mod self_checks {
    #[test]
    fn lanczos_reference_values() {
        assert!((super::ln_gamma(1.0)).abs() < 1e-13);
        assert!((super::ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((super::ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_reference() {
        let mut f = |x: f64| (-x * x).exp();
        let v = super::integrate(&mut f, -10.0, 10.0, 1e-14);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }
}
