//! Least squares through a Householder QR factorization.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::student_t_two_sided;

const RANK_TOL: f64 = 1e-10;

/// Thin QR of a design matrix, reused for fitting and for projecting
/// arbitrary vectors onto the residual space `M = I − X(XᵀX)⁻¹Xᵀ`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    x: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = x.shape();
        if k == 0 || n <= k {
            return Err(Error::InsufficientData { n, k });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite entry in design matrix".into()));
        }
        let qr = x.clone().qr();
        let r = qr.r();
        let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if diag_max == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * diag_max) {
            return Err(Error::SingularDesign);
        }
        Ok(LeastSquares {
            x: x.clone(),
            q: qr.q(),
            r,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// `b = R⁻¹ Qᵀ v`
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        let qtv = self.q.tr_mul(&DVector::from_column_slice(v));
        let b = self
            .r
            .solve_upper_triangular(&qtv)
            .expect("R has a nonzero diagonal");
        b.iter().copied().collect()
    }

    /// `X b`
    pub fn predict(&self, b: &[f64]) -> Vec<f64> {
        (&self.x * DVector::from_column_slice(b)).iter().copied().collect()
    }

    /// `v − X b(v)`, i.e. `M v`.
    pub fn residualize(&self, v: &[f64]) -> Vec<f64> {
        let fitted = self.predict(&self.coefficients(v));
        v.iter().zip(fitted).map(|(a, b)| a - b).collect()
    }

    /// `(XᵀX)⁻¹ = R⁻¹ R⁻ᵀ`
    pub fn xtx_inverse(&self) -> DMatrix<f64> {
        let k = self.k();
        let rinv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("R has a nonzero diagonal");
        &rinv * rinv.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    /// `eᵀe / n`
    pub sigma2: f64,
    /// `eᵀe / (n − k)`, used for coefficient standard errors.
    pub s2: f64,
    pub r2: f64,
    pub r2_adj: f64,
    /// Gaussian log-likelihood at the ML variance.
    pub loglik: f64,
    pub n: usize,
    pub k: usize,
}

/// Gaussian log-likelihood with variance `ssr / n` profiled out.
pub fn gaussian_loglik(ssr: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * core::f64::consts::PI).ln() + 1.0) - 0.5 * n * (ssr / n).ln()
}

pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit> {
    let ls = LeastSquares::new(x)?;
    ols_with(&ls, y)
}

pub fn ols_with(ls: &LeastSquares, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = (ls.n(), ls.k());
    if y.len() != n {
        return Err(Error::Parameter(alloc::format!("y has {} entries, X has {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite response".into()));
    }
    let b = ls.coefficients(y);
    let fitted = ls.predict(&b);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r2 = if tss > 0.0 { 1.0 - ssr / tss } else { 0.0 };
    let df = (n - k) as f64;
    let r2_adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;
    let s2 = ssr / df;
    let cov = ls.xtx_inverse() * s2;
    let std_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = b
        .iter()
        .zip(&std_errors)
        .map(|(c, se)| if *se > 0.0 { c / se } else { f64::INFINITY.copysign(*c) })
        .collect();
    let p_values = t_stats.iter().map(|t| student_t_two_sided(*t, df)).collect();
    Ok(OlsFit {
        coefficients: b,
        std_errors,
        t_stats,
        p_values,
        residuals,
        fitted,
        sigma2: ssr / n as f64,
        s2,
        r2,
        r2_adj,
        loglik: gaussian_loglik(ssr, n),
        n,
        k,
    })
}

/// `[1, q]` design for the productivity-on-output regression.
pub fn intercept_design(q: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(q.len(), 2, |i, j| if j == 0 { 1.0 } else { q[i] })
}
