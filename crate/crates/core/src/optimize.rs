//! One-dimensional maximization of a concentrated log-likelihood on an
//! open interval: grid scan, golden-section bracket refinement, then
//! parabolic polishing.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

const GRID: usize = 64;
const GOLDEN_WIDTH: f64 = 1e-6;
const PARABOLIC_TOL: f64 = 1e-9;
const MAX_ITER: usize = 100;
const BOUNDARY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    pub iterations: usize,
    /// Within `1e-4` of an endpoint of the search interval.
    pub at_boundary: bool,
    /// Every evaluated `(x, f(x))`.
    pub trace: Vec<(f64, f64)>,
}

/// Maximizes `f` on `[lo, hi]`. Non-finite evaluations count as `−∞`.
pub fn maximize<F>(mut f: F, lo: f64, hi: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Parameter(format!("empty search interval [{lo}, {hi}]")));
    }
    let mut trace = Vec::new();
    let mut eval = |x: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = f(x)?;
        trace.push((x, v));
        Ok(if v.is_finite() { v } else { f64::NEG_INFINITY })
    };

    let mut grid: Vec<f64> = (0..=GRID).map(|k| lo + (hi - lo) * k as f64 / GRID as f64).collect();
    if lo < 0.0 && hi > 0.0 {
        grid.push(0.0);
        grid.sort_by(f64::total_cmp);
    }
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(eval(x, &mut trace)?);
    }
    let best = (0..grid.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    if values[best] == f64::NEG_INFINITY {
        return Err(Error::Estimation {
            message: "objective is not finite anywhere on the grid".into(),
            trace,
        });
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];

    // golden section
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = eval(x1, &mut trace)?;
    let mut f2 = eval(x2, &mut trace)?;
    let mut iterations = 0;
    while b - a > GOLDEN_WIDTH {
        iterations += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2, &mut trace)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1, &mut trace)?;
        }
    }
    let (mut x, mut fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // a grid point can beat the interior when the maximum sits on an endpoint
    for (&gx, &gv) in grid.iter().zip(&values) {
        if gv > fx {
            x = gx;
            fx = gv;
        }
    }

    // parabolic polishing through three points spaced h apart
    let mut h = GOLDEN_WIDTH;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        iterations += 1;
        let (xl, xr) = ((x - h).max(lo), (x + h).min(hi));
        if xr - xl < h {
            converged = true;
            break;
        }
        let (fl, fr) = (eval(xl, &mut trace)?, eval(xr, &mut trace)?);
        let num = (x - xl).powi(2) * (fx - fr) - (x - xr).powi(2) * (fx - fl);
        let den = (x - xl) * (fx - fr) - (x - xr) * (fx - fl);
        if den == 0.0 || !num.is_finite() {
            converged = true;
            break;
        }
        let cand = (x - 0.5 * num / den).clamp(lo, hi);
        let fc = eval(cand, &mut trace)?;
        let step = (cand - x).abs();
        if fc > fx {
            x = cand;
            fx = fc;
        } else if fl > fx || fr > fx {
            let (bx, bf) = if fl > fr { (xl, fl) } else { (xr, fr) };
            x = bx;
            fx = bf;
            continue;
        }
        if step < PARABOLIC_TOL {
            converged = true;
            break;
        }
        h = (0.5 * step).max(PARABOLIC_TOL);
    }
    if !converged {
        return Err(Error::Estimation {
            message: format!("no convergence after {MAX_ITER} parabolic steps"),
            trace,
        });
    }
    Ok(Maximum {
        argmax: x,
        value: fx,
        iterations,
        at_boundary: x - lo < BOUNDARY_TOL || hi - x < BOUNDARY_TOL,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_peak() {
        let m = maximize(|x| Ok(-(x - 0.3) * (x - 0.3)), -1.0, 1.0).unwrap();
        assert!((m.argmax - 0.3).abs() < 1e-8, "{}", m.argmax);
        assert!(!m.at_boundary);
    }

    #[test]
    fn skewed_peak() {
        // maximum of ln(1 − x) + 2 ln(1 + x) at x = 1/3
        let m = maximize(|x| Ok((1.0 - x).ln() + 2.0 * (1.0 + x).ln()), -0.99, 0.99).unwrap();
        assert!((m.argmax - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn boundary_maximum_is_flagged() {
        let m = maximize(Ok, -1.0, 1.0).unwrap();
        assert!((m.argmax - 1.0).abs() < 1e-4);
        assert!(m.at_boundary);
    }

    #[test]
    fn non_finite_everywhere_fails() {
        let e = maximize(|_| Ok(f64::NAN), -1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::Estimation { .. }));
        assert!(maximize(Ok, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_is_on_the_grid() {
        let m = maximize(|x| Ok(-x.abs()), -0.77, 1.3).unwrap();
        assert!(m.argmax.abs() < 1e-8);
        assert!(m.trace.iter().any(|&(x, _)| x == 0.0));
    }
}
