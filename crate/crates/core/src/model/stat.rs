use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Add;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Number of unique entries of a symmetric `d × d` matrix.
pub const fn vech_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j`, in the row-major upper-triangle layout.
pub const fn vech_index(d: usize, i: usize, j: usize) -> usize {
    i * d - i * (i + 1) / 2 + j
}

/// Upper triangle of `m`, row-major.
pub fn vech(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(vech_len(d));
    for i in 0..d {
        for j in i..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Symmetric matrix whose upper triangle is `v`.
pub fn unvech(d: usize, v: &[f64]) -> DMatrix<f64> {
    assert_eq!(v.len(), vech_len(d), "vech length does not match dimension");
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

/// The BLR sufficient statistic `(yᵀy, Xᵀy, vech(XᵀX))` with its data count.
///
/// Counts are real so that tempering can scale them. Perturbed statistics are
/// represented by the same type and may have negative `yy` or an indefinite
/// `XᵀX`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistic {
    yy: f64,
    xy: Vec<f64>,
    xx_vech: Vec<f64>,
    count: f64,
}

impl SufficientStatistic {
    pub fn new(yy: f64, xy: Vec<f64>, xx_vech: Vec<f64>, count: f64) -> Result<Self> {
        let d = xy.len();
        if d == 0 || xx_vech.len() != vech_len(d) {
            return Err(Error::Argument(format!(
                "statistic layout mismatch: {} cross terms, {} vech entries",
                d,
                xx_vech.len()
            )));
        }
        if !(count >= 0.0) || !count.is_finite() {
            return Err(Error::arg("count must be finite and non-negative"));
        }
        if !yy.is_finite() || xy.iter().chain(xx_vech.iter()).any(|v| !v.is_finite()) {
            return Err(Error::arg("statistic contains non-finite values"));
        }
        Ok(SufficientStatistic {
            yy,
            xy,
            xx_vech,
            count,
        })
    }

    pub fn zeros(d: usize) -> Self {
        SufficientStatistic {
            yy: 0.0,
            xy: vec![0.0; d],
            xx_vech: vec![0.0; vech_len(d)],
            count: 0.0,
        }
    }

    /// Length `1 + d + d(d+1)/2` of the stacked statistic vector.
    pub const fn stat_len(d: usize) -> usize {
        1 + d + vech_len(d)
    }

    /// Stacked `(yy, xy, xx_vech)`, rebuilt by [`Self::from_vector`].
    pub fn from_vector(d: usize, v: &[f64], count: f64) -> Result<Self> {
        if v.len() != Self::stat_len(d) {
            return Err(Error::arg("stacked statistic has the wrong length"));
        }
        Self::new(v[0], v[1..1 + d].to_vec(), v[1 + d..].to_vec(), count)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(Self::stat_len(self.dim()));
        v.push(self.yy);
        v.extend_from_slice(&self.xy);
        v.extend_from_slice(&self.xx_vech);
        DVector::from_vec(v)
    }

    pub fn dim(&self) -> usize {
        self.xy.len()
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    pub fn xy(&self) -> &[f64] {
        &self.xy
    }

    pub fn xx_vech(&self) -> &[f64] {
        &self.xx_vech
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn xy_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.xy)
    }

    pub fn xx_matrix(&self) -> DMatrix<f64> {
        unvech(self.dim(), &self.xx_vech)
    }

    /// Every entry and the count multiplied by `k`; callers validate `k`.
    pub(crate) fn scaled(&self, k: f64) -> Self {
        SufficientStatistic {
            yy: self.yy * k,
            xy: self.xy.iter().map(|v| v * k).collect(),
            xx_vech: self.xx_vech.iter().map(|v| v * k).collect(),
            count: self.count * k,
        }
    }

    /// Apply `f` to every stored coordinate; the count is untouched.
    pub(crate) fn map_entries(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        SufficientStatistic {
            yy: f(self.yy),
            xy: self.xy.iter().map(|v| f(*v)).collect(),
            xx_vech: self.xx_vech.iter().map(|v| f(*v)).collect(),
            count: self.count,
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::arg("cannot add statistics of different dimension"));
        }
        Ok(self + other)
    }
}

impl Add for &SufficientStatistic {
    type Output = SufficientStatistic;

    /// # Panics
    /// If the dimensions differ; use [`SufficientStatistic::checked_add`]
    /// for untrusted inputs.
    fn add(self, rhs: &SufficientStatistic) -> SufficientStatistic {
        assert_eq!(self.dim(), rhs.dim(), "statistic dimension mismatch");
        SufficientStatistic {
            yy: self.yy + rhs.yy,
            xy: self.xy.iter().zip(&rhs.xy).map(|(a, b)| a + b).collect(),
            xx_vech: self
                .xx_vech
                .iter()
                .zip(&rhs.xx_vech)
                .map(|(a, b)| a + b)
                .collect(),
            count: self.count + rhs.count,
        }
    }
}

impl Add for SufficientStatistic {
    type Output = SufficientStatistic;

    fn add(self, rhs: SufficientStatistic) -> SufficientStatistic {
        &self + &rhs
    }
}
