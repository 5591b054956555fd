//! Maximum-likelihood spatial lag and spatial error models. Both are
//! estimated through a likelihood concentrated on the single spatial
//! coefficient, with the log-determinant taken from the weights spectrum.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::diagnostics::breusch_pagan;
use crate::error::{Error, Result};
use crate::ingest::GrowthVector;
use crate::ols::{gaussian_loglik, intercept_design, LeastSquares};
use crate::optimize::maximize;
use crate::stats::{normal_two_sided, TestStat};
use crate::weights::{SpatialWeights, Spectrum};

/// Offset from the admissible interval endpoints for the search.
pub const BOUND_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Lag,
    Error,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lag => "LAG",
            ModelKind::Error => "ERROR",
        }
    }
}

/// A coefficient with its asymptotic standard error and z-statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

impl Estimate {
    fn new(value: f64, std_error: f64) -> Self {
        let z = value / std_error;
        Estimate {
            value,
            std_error,
            z,
            p_value: normal_two_sided(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFit {
    pub kind: ModelKind,
    /// ρ for the lag model, λ for the error model.
    pub spatial_coef: Estimate,
    pub beta: Vec<Estimate>,
    /// `ε̂ᵀε̂ / n`
    pub sigma2: f64,
    pub loglik: f64,
    /// Log-likelihood at a zero spatial coefficient.
    pub ols_loglik: f64,
    /// Squared correlation of predicted and observed y.
    pub pseudo_r2: f64,
    pub bp_spatial: Option<TestStat>,
    pub rho_bounds: (f64, f64),
    /// Innovation residuals.
    pub residuals: Vec<f64>,
    pub predicted: Vec<f64>,
    pub n: usize,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl SpatialFit {
    pub fn alpha_hat(&self) -> f64 {
        self.beta[0].value
    }

    pub fn gamma_hat(&self) -> f64 {
        self.beta[1].value
    }
}

/// `(ω_min, ω_max)` of the row-standardized matrix.
pub fn eigen_bounds(w: &SpatialWeights) -> Result<(f64, f64)> {
    let s = w.spectrum()?;
    Ok((s.min, s.max))
}

fn check_inputs(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<()> {
    if y.len() != x.nrows() || y.len() != w.n() {
        return Err(Error::Parameter(format!(
            "{} observations, {} design rows, {} regions in W",
            y.len(),
            x.nrows(),
            w.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite response".into()));
    }
    Ok(())
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Concentrated lag-model likelihood. With `e0`, `eL` the OLS residuals of
/// `y` and `Wy` on X, `σ²(ρ) = |e0 − ρ eL|² / n`.
pub struct LagLikelihood<'a> {
    y: &'a [f64],
    wy: Vec<f64>,
    ls: LeastSquares,
    spectrum: &'a Spectrum,
    e0: Vec<f64>,
    el: Vec<f64>,
    b0: Vec<f64>,
    bl: Vec<f64>,
}

impl<'a> LagLikelihood<'a> {
    pub fn new(y: &'a [f64], x: &DMatrix<f64>, w: &'a SpatialWeights) -> Result<Self> {
        check_inputs(y, x, w)?;
        let ls = LeastSquares::new(x)?;
        let spectrum = w.spectrum()?;
        let wy = w.lag(y);
        let b0 = ls.coefficients(y);
        let bl = ls.coefficients(&wy);
        let e0 = ls.residualize(y);
        let el = ls.residualize(&wy);
        Ok(LagLikelihood {
            y,
            wy,
            ls,
            spectrum,
            e0,
            el,
            b0,
            bl,
        })
    }

    pub fn sigma2(&self, rho: f64) -> f64 {
        let n = self.y.len() as f64;
        self.e0
            .iter()
            .zip(&self.el)
            .map(|(a, b)| (a - rho * b) * (a - rho * b))
            .sum::<f64>()
            / n
    }

    pub fn beta(&self, rho: f64) -> Vec<f64> {
        self.b0.iter().zip(&self.bl).map(|(a, b)| a - rho * b).collect()
    }

    pub fn loglik(&self, rho: f64) -> f64 {
        let n = self.y.len();
        gaussian_loglik(self.sigma2(rho) * n as f64, n) + self.spectrum.log_det(rho)
    }

    /// `y − ρWy − Xβ(ρ)`
    pub fn residuals(&self, rho: f64) -> Vec<f64> {
        let xb = self.ls.predict(&self.beta(rho));
        (0..self.y.len())
            .map(|i| self.y[i] - rho * self.wy[i] - xb[i])
            .collect()
    }
}

/// Concentrated error-model likelihood: GLS on `A y`, `A X` with
/// `A = I − λW` at each λ.
pub struct ErrorLikelihood<'a> {
    y: &'a [f64],
    x: &'a DMatrix<f64>,
    w: &'a SpatialWeights,
    spectrum: &'a Spectrum,
}

/// One evaluation of the error-model likelihood.
pub struct ErrorPoint {
    pub loglik: f64,
    pub beta: Vec<f64>,
    /// `A (y − Xβ)`
    pub innovations: Vec<f64>,
    pub sigma2: f64,
}

fn filter(w: &SpatialWeights, lambda: f64, v: &[f64]) -> Vec<f64> {
    let wv = w.lag(v);
    v.iter().zip(wv).map(|(a, b)| a - lambda * b).collect()
}

impl<'a> ErrorLikelihood<'a> {
    pub fn new(y: &'a [f64], x: &'a DMatrix<f64>, w: &'a SpatialWeights) -> Result<Self> {
        check_inputs(y, x, w)?;
        LeastSquares::new(x)?;
        let spectrum = w.spectrum()?;
        Ok(ErrorLikelihood { y, x, w, spectrum })
    }

    pub fn filtered_design(&self, lambda: f64) -> DMatrix<f64> {
        let mut ax = self.x.clone();
        for c in 0..ax.ncols() {
            let col: Vec<f64> = self.x.column(c).iter().copied().collect();
            ax.set_column(c, &dvec(&filter(self.w, lambda, &col)));
        }
        ax
    }

    pub fn evaluate(&self, lambda: f64) -> Result<ErrorPoint> {
        let n = self.y.len();
        let ay = filter(self.w, lambda, self.y);
        let ls = LeastSquares::new(&self.filtered_design(lambda))?;
        let beta = ls.coefficients(&ay);
        let innovations = ls.residualize(&ay);
        let ssr = sum_sq(&innovations);
        Ok(ErrorPoint {
            loglik: gaussian_loglik(ssr, n) + self.spectrum.log_det(lambda),
            beta,
            innovations,
            sigma2: ssr / n as f64,
        })
    }

    pub fn loglik(&self, lambda: f64) -> Result<f64> {
        Ok(self.evaluate(lambda)?.loglik)
    }
}

fn search_interval(spectrum: &Spectrum) -> (f64, f64) {
    let (lo, hi) = spectrum.bounds();
    (lo + BOUND_OFFSET, hi - BOUND_OFFSET)
}

/// `(I − c W)⁻¹` and `W (I − c W)⁻¹`, dense.
fn spatial_inverse(w: &SpatialWeights, c: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let wd = w.to_dense();
    let n = w.n();
    let a = DMatrix::<f64>::identity(n, n) - &wd * c;
    let inv = a
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Estimation {
            message: format!("I - {c} W is singular"),
            trace: Vec::new(),
        })?;
    let wa = wd * &inv;
    Ok((inv, wa))
}

/// Standard errors from the inverse of an information matrix.
fn std_errors(info: &DMatrix<f64>) -> Result<Vec<f64>> {
    let cov = info.clone().try_inverse().ok_or_else(|| Error::Estimation {
        message: "information matrix is singular".into(),
        trace: Vec::new(),
    })?;
    Ok((0..info.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect())
}

fn pseudo_r2(pred: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let (mp, my) = (pred.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut spy, mut spp, mut syy) = (0.0, 0.0, 0.0);
    for (p, v) in pred.iter().zip(y) {
        spy += (p - mp) * (v - my);
        spp += (p - mp) * (p - mp);
        syy += (v - my) * (v - my);
    }
    if spp > 0.0 && syy > 0.0 {
        spy * spy / (spp * syy)
    } else {
        0.0
    }
}

fn boundary_warning(kind: ModelKind, at_boundary: bool, coef: f64, bounds: (f64, f64)) -> Vec<String> {
    if at_boundary {
        alloc::vec![format!(
            "{} coefficient {coef} is at the edge of ({}, {})",
            kind.label(),
            bounds.0,
            bounds.1
        )]
    } else {
        Vec::new()
    }
}

/// Frobenius inner product `tr(AᵀA)`.
fn tr_ata(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn fit_lag(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<SpatialFit> {
    let lik = LagLikelihood::new(y, x, w)?;
    let spectrum = lik.spectrum;
    let (lo, hi) = search_interval(spectrum);
    let max = maximize(|r| Ok(lik.loglik(r)), lo, hi)?;
    let rho = max.argmax;
    let n = y.len();
    let k = x.ncols();
    let beta = lik.beta(rho);
    let sigma2 = lik.sigma2(rho);
    let residuals = lik.residuals(rho);

    let (inv, wa) = spatial_inverse(w, rho)?;
    let xb = x * dvec(&beta);
    let waxb = &wa * &xb;
    let (tr1, tr2) = spectrum.traces(rho);
    let mut info = DMatrix::<f64>::zeros(k + 2, k + 2);
    let xtx = x.transpose() * x / sigma2;
    info.view_mut((0, 0), (k, k)).copy_from(&xtx);
    let xw = x.transpose() * &waxb / sigma2;
    for i in 0..k {
        info[(i, k)] = xw[i];
        info[(k, i)] = xw[i];
    }
    info[(k, k)] = tr2 + tr_ata(&wa) + waxb.dot(&waxb) / sigma2;
    info[(k, k + 1)] = tr1 / sigma2;
    info[(k + 1, k)] = tr1 / sigma2;
    info[(k + 1, k + 1)] = n as f64 / (2.0 * sigma2 * sigma2);
    let se = std_errors(&info)?;

    let predicted: Vec<f64> = (&inv * &xb).iter().copied().collect();
    let bounds = spectrum.bounds();
    Ok(SpatialFit {
        kind: ModelKind::Lag,
        spatial_coef: Estimate::new(rho, se[k]),
        beta: beta.iter().zip(&se).map(|(b, s)| Estimate::new(*b, *s)).collect(),
        sigma2,
        loglik: max.value,
        ols_loglik: lik.loglik(0.0),
        pseudo_r2: pseudo_r2(&predicted, y),
        bp_spatial: breusch_pagan(&residuals, x).ok(),
        rho_bounds: bounds,
        residuals,
        predicted,
        n,
        iterations: max.iterations,
        warnings: boundary_warning(ModelKind::Lag, max.at_boundary, rho, bounds),
    })
}

pub fn fit_error(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<SpatialFit> {
    let lik = ErrorLikelihood::new(y, x, w)?;
    let spectrum = lik.spectrum;
    let (lo, hi) = search_interval(spectrum);
    let max = maximize(|l| lik.loglik(l), lo, hi)?;
    let lambda = max.argmax;
    let n = y.len();
    let k = x.ncols();
    let point = lik.evaluate(lambda)?;
    let sigma2 = point.sigma2;

    let (_, wb) = spatial_inverse(w, lambda)?;
    let (tr1, tr2) = spectrum.traces(lambda);
    let bx = lik.filtered_design(lambda);
    let mut info = DMatrix::<f64>::zeros(k + 2, k + 2);
    info.view_mut((0, 0), (k, k))
        .copy_from(&(bx.transpose() * &bx / sigma2));
    info[(k, k)] = tr2 + tr_ata(&wb);
    info[(k, k + 1)] = tr1 / sigma2;
    info[(k + 1, k)] = tr1 / sigma2;
    info[(k + 1, k + 1)] = n as f64 / (2.0 * sigma2 * sigma2);
    let se = std_errors(&info)?;

    let predicted: Vec<f64> = (x * dvec(&point.beta)).iter().copied().collect();
    let bounds = spectrum.bounds();
    Ok(SpatialFit {
        kind: ModelKind::Error,
        spatial_coef: Estimate::new(lambda, se[k]),
        beta: point.beta.iter().zip(&se).map(|(b, s)| Estimate::new(*b, *s)).collect(),
        sigma2,
        loglik: point.loglik,
        ols_loglik: lik.loglik(0.0)?,
        pseudo_r2: pseudo_r2(&predicted, y),
        bp_spatial: breusch_pagan(&point.innovations, x).ok(),
        rho_bounds: bounds,
        residuals: point.innovations,
        predicted,
        n,
        iterations: max.iterations,
        warnings: boundary_warning(ModelKind::Error, max.at_boundary, lambda, bounds),
    })
}

pub fn fit(kind: ModelKind, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<SpatialFit> {
    match kind {
        ModelKind::Lag => fit_lag(y, x, w),
        ModelKind::Error => fit_error(y, x, w),
    }
}

/// `p = α + γ q` with a spatial lag or spatial error term.
pub fn fit_verdoorn(kind: ModelKind, gv: &GrowthVector, w: &SpatialWeights) -> Result<SpatialFit> {
    if gv.regions.as_slice() != w.adjacency.ordering.as_slice() {
        return Err(Error::Parameter("growth vector and weights use different region orderings".into()));
    }
    fit(kind, &gv.p, &intercept_design(&gv.q), w)
}

/// Concentrated log-likelihood on a grid strictly inside the bounds.
pub fn likelihood_profile(
    kind: ModelKind,
    y: &[f64],
    x: &DMatrix<f64>,
    w: &SpatialWeights,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = w.spectrum()?.bounds();
    if let Some(g) = grid.iter().find(|&&g| !(g > lo && g < hi)) {
        return Err(Error::Parameter(format!("grid point {g} outside ({lo}, {hi})")));
    }
    match kind {
        ModelKind::Lag => {
            let lik = LagLikelihood::new(y, x, w)?;
            Ok(grid.iter().map(|&r| (r, lik.loglik(r))).collect())
        }
        ModelKind::Error => {
            let lik = ErrorLikelihood::new(y, x, w)?;
            grid.iter().map(|&l| Ok((l, lik.loglik(l)?))).collect()
        }
    }
}
