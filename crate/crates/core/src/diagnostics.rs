//! Specification tests on OLS residuals: normality, heteroskedasticity,
//! residual spatial autocorrelation, and Lagrange multiplier tests for an
//! omitted spatial lag or spatially autocorrelated errors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GrowthVector;
use crate::moran::{permutation_test, MoranResult};
use crate::ols::{intercept_design, ols_with, LeastSquares, OlsFit};
use crate::stats::TestStat;
use crate::weights::SpatialWeights;

fn central_moment_ratios(e: &[f64]) -> Result<(f64, f64)> {
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in e {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(m2 > 1e-28 * scale * scale) {
        return Err(Error::DegenerateResiduals);
    }
    let skew = m3 / (m2 * m2.sqrt());
    let kurt = m4 / (m2 * m2);
    Ok((skew, kurt))
}

/// `JB = n/6 · (S² + (K − 3)²/4)` against χ²(2).
pub fn jarque_bera(e: &[f64]) -> Result<TestStat> {
    if e.len() < 4 {
        return Err(Error::InsufficientData { n: e.len(), k: 4 });
    }
    let (s, k) = central_moment_ratios(e)?;
    let n = e.len() as f64;
    Ok(TestStat::chi2(n / 6.0 * (s * s + (k - 3.0) * (k - 3.0) / 4.0), 2.0))
}

fn explained_ss(ls: &LeastSquares, v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let fitted = ls.predict(&ls.coefficients(v));
    let ess = fitted.iter().map(|f| (f - mean) * (f - mean)).sum();
    let tss = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ess, tss)
}

fn aux_inputs(e: &[f64], x: &DMatrix<f64>) -> Result<(LeastSquares, f64)> {
    if e.len() != x.nrows() {
        return Err(Error::Parameter(format!("{} residuals for {} rows", e.len(), x.nrows())));
    }
    let ls = LeastSquares::new(x)?;
    let sigma2 = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateResiduals);
    }
    Ok((ls, sigma2))
}

/// Regress `e²/σ̂² − 1` on X; half the explained sum of squares against
/// χ²(k − 1).
pub fn breusch_pagan(e: &[f64], x: &DMatrix<f64>) -> Result<TestStat> {
    let (ls, sigma2) = aux_inputs(e, x)?;
    let g: Vec<f64> = e.iter().map(|v| v * v / sigma2 - 1.0).collect();
    let (ess, _) = explained_ss(&ls, &g);
    Ok(TestStat::chi2(0.5 * ess, (x.ncols() - 1) as f64))
}

/// Studentized Breusch-Pagan: `n · R²` from regressing `e²` on X.
pub fn koenker_bassett(e: &[f64], x: &DMatrix<f64>) -> Result<TestStat> {
    let (ls, sigma2) = aux_inputs(e, x)?;
    let u: Vec<f64> = e.iter().map(|v| v * v).collect();
    let (ess, tss) = explained_ss(&ls, &u);
    // constant e² has nothing to explain
    let r2 = if tss > 1e-28 * sigma2 * sigma2 * e.len() as f64 { ess / tss } else { 0.0 };
    Ok(TestStat::chi2(e.len() as f64 * r2, (x.ncols() - 1) as f64))
}

/// Moran's I of the OLS residuals with permutation inference.
pub fn residual_moran(e: &[f64], w: &SpatialWeights, n_perm: usize, seed: u64) -> Result<MoranResult> {
    permutation_test(e, w, n_perm, seed)
}

/// Score-test building blocks, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmQuantities {
    /// `eᵀWe / σ̂²`
    pub d_lambda: f64,
    /// `eᵀWy / σ̂²`
    pub d_rho: f64,
    /// `tr(WᵀW + WW)`
    pub t: f64,
    /// `(WXb)ᵀ M (WXb) / σ̂² + T`
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmTests {
    pub lm_lag: TestStat,
    pub lm_err: TestStat,
    /// `None` when `D ≤ T`.
    pub rlm_lag: Option<TestStat>,
    pub rlm_err: Option<TestStat>,
    pub quantities: Option<LmQuantities>,
}

impl LmTests {
    /// Builds the evidence from published or externally computed
    /// statistics, each referred to χ²(1).
    pub fn from_statistics(lm_lag: f64, lm_err: f64, rlm_lag: Option<f64>, rlm_err: Option<f64>) -> Self {
        LmTests {
            lm_lag: TestStat::chi2(lm_lag, 1.0),
            lm_err: TestStat::chi2(lm_err, 1.0),
            rlm_lag: rlm_lag.map(|v| TestStat::chi2(v, 1.0)),
            rlm_err: rlm_err.map(|v| TestStat::chi2(v, 1.0)),
            quantities: None,
        }
    }

    /// Robust pair, or the degeneracy that prevented it.
    pub fn robust(&self) -> Result<(TestStat, TestStat)> {
        match (self.rlm_lag, self.rlm_err) {
            (Some(l), Some(e)) => Ok((l, e)),
            _ => {
                let q = self.quantities.unwrap_or(LmQuantities {
                    d_lambda: f64::NAN,
                    d_rho: f64::NAN,
                    t: f64::NAN,
                    d: f64::NAN,
                });
                Err(Error::DiagnosticDegeneracy {
                    d: q.d,
                    t: q.t,
                    d_lambda: q.d_lambda,
                    d_rho: q.d_rho,
                })
            }
        }
    }
}

/// `tr(WᵀW + WW) = Σ_ij w_ij² + Σ_ij w_ij w_ji`
pub fn lm_trace(w: &SpatialWeights) -> f64 {
    w.triplets()
        .map(|(i, j, wij)| {
            let wji = w
                .neighbors(j)
                .binary_search(&i)
                .map(|k| w.weights[j][k])
                .unwrap_or(0.0);
            wij * wij + wij * wji
        })
        .sum()
}

/// The four LM statistics for a fitted OLS model.
pub fn lm_tests_with(ls: &LeastSquares, fit: &OlsFit, y: &[f64], w: &SpatialWeights) -> Result<LmTests> {
    let n = y.len();
    if w.n() != n {
        return Err(Error::Parameter(format!("weights for {} regions, {n} observations", w.n())));
    }
    let e = &fit.residuals;
    let sigma2 = fit.sigma2;
    if exact_fit(fit, y) {
        return Err(Error::DegenerateResiduals);
    }
    let we = w.lag(e);
    let wy = w.lag(y);
    let d_lambda = dot(e, &we) / sigma2;
    let d_rho = dot(e, &wy) / sigma2;
    let t = lm_trace(w);
    let wxb = w.lag(&fit.fitted);
    let m_wxb = ls.residualize(&wxb);
    let d = dot(&m_wxb, &m_wxb) / sigma2 + t;
    if !(t > 0.0) {
        return Err(Error::DegenerateWeights("tr(W'W + WW) is zero".into()));
    }
    let lm_err = d_lambda * d_lambda / t;
    let lm_lag = d_rho * d_rho / d;
    let quantities = LmQuantities { d_lambda, d_rho, t, d };
    let (rlm_lag, rlm_err) = if d - t > 0.0 && d > t {
        let rl = (d_rho - d_lambda).powi(2) / (d - t);
        let re = (d_lambda - t / d * d_rho).powi(2) / (t * (1.0 - t / d));
        (Some(TestStat::chi2(rl, 1.0)), Some(TestStat::chi2(re, 1.0)))
    } else {
        (None, None)
    };
    Ok(LmTests {
        lm_lag: TestStat::chi2(lm_lag, 1.0),
        lm_err: TestStat::chi2(lm_err, 1.0),
        rlm_lag,
        rlm_err,
        quantities: Some(quantities),
    })
}

pub fn lm_tests(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<LmTests> {
    let ls = LeastSquares::new(x)?;
    let fit = ols_with(&ls, y)?;
    lm_tests_with(&ls, &fit, y, w)
}

/// Residual variance at rounding level relative to the response.
fn exact_fit(fit: &OlsFit, y: &[f64]) -> bool {
    let scale = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    !(fit.sigma2 > 1e-24 * scale)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// OLS fit with the full diagnostic battery. A test that cannot be computed
/// (for instance on an exact fit) is left out and explained in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsReport {
    pub fit: OlsFit,
    pub jb: Option<TestStat>,
    pub bp: Option<TestStat>,
    pub kb: Option<TestStat>,
    pub residual_moran: Option<MoranResult>,
    pub lm: Option<LmTests>,
    pub n_obs: usize,
    pub notes: Vec<String>,
}

impl OlsReport {
    pub fn alpha_hat(&self) -> f64 {
        self.fit.coefficients[0]
    }

    pub fn gamma_hat(&self) -> f64 {
        self.fit.coefficients[1]
    }
}

pub fn ols_report(
    y: &[f64],
    x: &DMatrix<f64>,
    w: &SpatialWeights,
    n_perm: usize,
    seed: u64,
) -> Result<OlsReport> {
    let ls = LeastSquares::new(x)?;
    let fit = ols_with(&ls, y)?;
    if w.n() != y.len() {
        return Err(Error::Parameter(format!(
            "weights for {} regions, {} observations",
            w.n(),
            y.len()
        )));
    }
    let mut notes = Vec::new();
    let mut keep = |name: &str, r: Result<TestStat>| match r {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let e = &fit.residuals;
    let exact = exact_fit(&fit, y);
    let guard = |r: Result<TestStat>| if exact { Err(Error::DegenerateResiduals) } else { r };
    let jb = keep("JB", guard(jarque_bera(e)));
    let bp = keep("BP", guard(breusch_pagan(e, x)));
    let kb = keep("KB", guard(koenker_bassett(e, x)));
    let moran = if exact { Err(Error::DegenerateResiduals) } else { residual_moran(e, w, n_perm, seed) };
    let residual_moran = match moran {
        Ok(m) => Some(m),
        Err(err) => {
            notes.push(format!("residual Moran: {err}"));
            None
        }
    };
    let lm = match lm_tests_with(&ls, &fit, y, w) {
        Ok(lm) => {
            if let Err(err) = lm.robust() {
                notes.push(format!("robust LM: {err}"));
            }
            Some(lm)
        }
        Err(err) => {
            notes.push(format!("LM: {err}"));
            None
        }
    };
    Ok(OlsReport {
        n_obs: fit.n,
        fit,
        jb,
        bp,
        kb,
        residual_moran,
        lm,
        notes,
    })
}

/// `p = α + γ q + u` with the diagnostic battery.
pub fn estimate_verdoorn_ols(gv: &GrowthVector, w: &SpatialWeights, n_perm: usize, seed: u64) -> Result<OlsReport> {
    if gv.regions.as_slice() != w.adjacency.ordering.as_slice() {
        return Err(Error::Parameter("growth vector and weights use different region orderings".into()));
    }
    ols_report(&gv.p, &intercept_design(&gv.q), w, n_perm, seed)
}
