//! Domain types: datasets, sufficient statistics, NIG/NIW beliefs and
//! posterior sample sets.

mod stat;
mod synthetic;

pub use stat::{unvech, vech, vech_index, vech_len, SufficientStatistic};
pub use synthetic::{
    generate_synthetic, SynConfig, SyntheticData, DESK_INPUT_BOUND, DESK_OUTPUT_BOUND,
};

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::linalg::{chol_jittered, sample_mvn, std_normal_vec, symmetrize};
use crate::{Error, Result};

/// A party's private data. Rows are clipped to `‖x‖₂ ≤ Bx` by rescaling and
/// outputs to `|y| ≤ By` at construction, so every instance satisfies the
/// bounds the sensitivity analysis relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    input_bound: f64,
    output_bound: f64,
}

impl Dataset {
    /// `inputs` is row-major with `outputs.len()` rows of length `dim`.
    pub fn new(
        dim: usize,
        mut inputs: Vec<f64>,
        mut outputs: Vec<f64>,
        input_bound: f64,
        output_bound: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dataset dimension must be at least 1"));
        }
        if !(input_bound >= 0.0) || !(output_bound >= 0.0) {
            return Err(Error::arg("dataset bounds must be non-negative"));
        }
        if inputs.len() != outputs.len() * dim {
            return Err(Error::Argument(format!(
                "{} input values do not form {} rows of dimension {dim}",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::arg("dataset contains non-finite values"));
        }
        for row in inputs.chunks_exact_mut(dim) {
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
            if norm > input_bound {
                let s = if norm > 0.0 { input_bound / norm } else { 0.0 };
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
        for y in outputs.iter_mut() {
            *y = y.clamp(-output_bound, output_bound);
        }
        Ok(Dataset {
            dim,
            inputs,
            outputs,
            input_bound,
            output_bound,
        })
    }

    pub fn empty(dim: usize, input_bound: f64, output_bound: f64) -> Result<Self> {
        Self::new(dim, Vec::new(), Vec::new(), input_bound, output_bound)
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_bound(&self) -> f64 {
        self.input_bound
    }

    pub fn output_bound(&self) -> f64 {
        self.output_bound
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.inputs
            .chunks_exact(self.dim)
            .zip(self.outputs.iter().copied())
    }

    /// Rows of `self` followed by rows of `other`, clipped to `self`'s bounds.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.dim != self.dim {
            return Err(Error::arg(
                "cannot concatenate datasets of different dimension",
            ));
        }
        let mut inputs = self.inputs.clone();
        inputs.extend_from_slice(&other.inputs);
        let mut outputs = self.outputs.clone();
        outputs.extend_from_slice(&other.outputs);
        Dataset::new(
            self.dim,
            inputs,
            outputs,
            self.input_bound,
            self.output_bound,
        )
    }
}

/// One posterior draw of the regression weights and noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSample {
    w: Vec<f64>,
    sigma2: f64,
}

impl ThetaSample {
    pub fn new(w: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "invalid parameter sample (sigma2 = {sigma2})"
            )));
        }
        Ok(ThetaSample { w, sigma2 })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w·x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    /// Direct draws from a closed-form NIG belief.
    Direct,
    /// Noise-aware Gibbs sampler output.
    Gibbs,
    /// A fold, truncation or merge of other sets.
    Derived,
}

/// Everything needed to regenerate a sample set from identical inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub source: SampleSource,
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Latent draws rejected and redrawn by the sampler.
    pub retries: u64,
}

impl Provenance {
    pub fn direct(seed: u64) -> Self {
        Provenance {
            source: SampleSource::Direct,
            chains: 1,
            burn_in: 0,
            thin: 1,
            seed,
            retries: 0,
        }
    }
}

/// A non-empty set of parameter samples, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSampleSet {
    samples: Vec<ThetaSample>,
    provenance: Provenance,
}

impl ThetaSampleSet {
    pub fn new(samples: Vec<ThetaSample>, provenance: Provenance) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        };
        let d = first.dim();
        if samples.iter().any(|s| s.dim() != d) {
            return Err(Error::arg("samples of mixed dimension"));
        }
        Ok(ThetaSampleSet {
            samples,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn samples(&self) -> &[ThetaSample] {
        &self.samples
    }

    pub fn iter(&self) -> core::slice::Iter<'_, ThetaSample> {
        self.samples.iter()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Row-major points `(w₁..w_d, ln σ²)`, the space the kNN estimator
    /// works in.
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * (self.dim() + 1));
        for s in &self.samples {
            out.extend_from_slice(&s.w);
            out.push(libm::log(s.sigma2));
        }
        out
    }

    /// Fold `index` of `folds` interleaved folds: samples `index, index +
    /// folds, ...`. Interleaving spreads every chain over all folds.
    pub fn fold(&self, index: usize, folds: usize) -> Result<ThetaSampleSet> {
        if folds == 0 || index >= folds {
            return Err(Error::arg("fold index out of range"));
        }
        let samples: Vec<_> = self
            .samples
            .iter()
            .skip(index)
            .step_by(folds)
            .cloned()
            .collect();
        ThetaSampleSet::new(samples, self.derived())
    }

    pub fn truncated(&self, len: usize) -> Result<ThetaSampleSet> {
        let samples = self.samples[..len.min(self.len())].to_vec();
        ThetaSampleSet::new(samples, self.derived())
    }

    fn derived(&self) -> Provenance {
        Provenance {
            source: SampleSource::Derived,
            ..self.provenance
        }
    }
}

/// Normal-inverse-gamma belief: `σ² ~ IG(a, b)`, `w | σ² ~ N(w_mean, σ² V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigBelief {
    w_mean: DVector<f64>,
    v: DMatrix<f64>,
    a: f64,
    b: f64,
    v_chol: DMatrix<f64>,
}

impl NigBelief {
    pub fn new(w_mean: DVector<f64>, v: DMatrix<f64>, a: f64, b: f64) -> Result<Self> {
        let d = w_mean.len();
        if d == 0 || v.nrows() != d || v.ncols() != d {
            return Err(Error::arg("NIG mean and covariance dimensions disagree"));
        }
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Argument(format!(
                "NIG shape and scale must be positive (a = {a}, b = {b})"
            )));
        }
        if w_mean.iter().any(|x| !x.is_finite())
            || (&v - v.transpose()).abs().max() > 1e-9 * (1.0 + v.abs().max())
        {
            return Err(Error::arg("NIG covariance must be symmetric and finite"));
        }
        let mut v = v;
        symmetrize(&mut v);
        let v_chol = nalgebra::Cholesky::new(v.clone())
            .ok_or_else(|| Error::arg("NIG covariance is not positive definite"))?
            .unpack();
        Ok(NigBelief {
            w_mean,
            v,
            a,
            b,
            v_chol,
        })
    }

    /// Prior `w | σ² ~ N(0, σ² Λ₀⁻¹)`, `σ² ~ IG(alpha, beta)`.
    pub fn from_precision(lambda0: &DMatrix<f64>, alpha: f64, beta: f64) -> Result<Self> {
        let d = lambda0.nrows();
        let inv = nalgebra::Cholesky::new(lambda0.clone())
            .ok_or_else(|| Error::Config("prior precision is not positive definite".into()))?
            .inverse();
        NigBelief::new(DVector::zeros(d), inv, alpha, beta).map_err(|e| match e {
            Error::Argument(m) => Error::Config(m),
            e => e,
        })
    }

    pub fn dim(&self) -> usize {
        self.w_mean.len()
    }

    pub fn w_mean(&self) -> &DVector<f64> {
        &self.w_mean
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ThetaSample {
        let g: f64 = Gamma::new(self.a, 1.0).expect("a > 0").sample(rng);
        let sigma2 = (self.b / g).max(f64::MIN_POSITIVE);
        let z = std_normal_vec(rng, self.dim());
        let w = &self.w_mean + (&self.v_chol * z) * libm::sqrt(sigma2);
        ThetaSample {
            w: w.iter().copied().collect(),
            sigma2,
        }
    }

    /// `n` independent draws from the stream `(seed, tag)`.
    pub fn sample_set(&self, n: usize, seed: u64) -> Result<ThetaSampleSet> {
        let mut rng = crate::rng::stream(seed, &[crate::rng::TAG_PRIOR]);
        let samples = (0..n).map(|_| self.sample(&mut rng)).collect();
        ThetaSampleSet::new(samples, Provenance::direct(seed))
    }
}

/// Normal-inverse-Wishart belief over an input distribution `N(μ, Σ)`:
/// `Σ ~ IW(Ψ, ν)`, `μ | Σ ~ N(μ₀, Σ/κ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwBelief {
    mu0: DVector<f64>,
    kappa0: f64,
    psi: DMatrix<f64>,
    nu: f64,
}

impl NiwBelief {
    pub fn new(mu0: DVector<f64>, kappa0: f64, psi: DMatrix<f64>, nu: f64) -> Result<Self> {
        let d = mu0.len();
        if d == 0 || psi.nrows() != d || psi.ncols() != d {
            return Err(Error::arg("NIW mean and scale dimensions disagree"));
        }
        if !(kappa0 > 0.0) || !kappa0.is_finite() {
            return Err(Error::arg("NIW kappa0 must be positive"));
        }
        if !(nu > d as f64 - 1.0) || !nu.is_finite() {
            return Err(Error::Argument(format!(
                "NIW degrees of freedom {nu} must exceed d - 1"
            )));
        }
        if nalgebra::Cholesky::new(psi.clone()).is_none() {
            return Err(Error::arg("NIW scale matrix is not positive definite"));
        }
        Ok(NiwBelief {
            mu0,
            kappa0,
            psi,
            nu,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DMatrix<f64>) {
        let sigma = sample_inv_wishart(rng, &self.psi, self.nu).expect("validated NIW scale");
        let mu = sample_mean(rng, &self.mu0, &sigma, self.kappa0).expect("IW draw is SPD");
        (mu, sigma)
    }
}

/// `μ ~ N(μ₀, Σ/κ)`.
pub(crate) fn sample_mean<R: Rng + ?Sized>(
    rng: &mut R,
    mu0: &DVector<f64>,
    sigma: &DMatrix<f64>,
    kappa: f64,
) -> Result<DVector<f64>> {
    let (c, _) = chol_jittered(&(sigma / kappa))?;
    Ok(sample_mvn(rng, mu0, &c.unpack()))
}

/// `Σ ~ IW(Ψ, ν)` via the Bartlett decomposition of `Σ⁻¹ ~ W(Ψ⁻¹, ν)`.
/// Real-valued `ν > d - 1` is allowed.
pub(crate) fn sample_inv_wishart<R: Rng + ?Sized>(
    rng: &mut R,
    psi: &DMatrix<f64>,
    nu: f64,
) -> Result<DMatrix<f64>> {
    let d = psi.nrows();
    let psi_inv = chol_jittered(psi)?.0.inverse();
    let l = chol_jittered(&psi_inv)?.0.unpack();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi2: f64 = 2.0
            * Gamma::new(0.5 * (nu - i as f64), 1.0)
                .map_err(|_| Error::Numerical(format!("invalid Wishart degrees of freedom {nu}")))?
                .sample(rng);
        a[(i, i)] = libm::sqrt(chi2);
        for j in 0..i {
            a[(i, j)] = rng.sample(rand_distr::StandardNormal);
        }
    }
    let b = l * a;
    let b_inv = b
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Numerical("singular Wishart factor".into()))?;
    let mut sigma = b_inv.transpose() * b_inv;
    symmetrize(&mut sigma);
    Ok(sigma)
}
