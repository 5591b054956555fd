//! Global Moran's I, the Moran scatterplot and permutation inference.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::weights::SpatialWeights;

pub const MIN_PERMUTATIONS: usize = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationInference {
    pub n_perm: usize,
    pub pseudo_p: f64,
    pub perm_mean: f64,
    /// Sample standard deviation of the permuted statistics.
    pub perm_sd: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub statistic: f64,
    pub expected: f64,
    /// Standardized deviate under the normality assumption.
    pub z_norm: f64,
    pub perm: Option<PermutationInference>,
}

/// Deviations from the mean; errors when the input is constant.
pub(crate) fn centered(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !zz.is_finite() || zz <= 1e-26 * n * scale * scale {
        return Err(Error::DegenerateVariance);
    }
    Ok((z, zz))
}

fn check_inputs(x: &[f64], w: &SpatialWeights) -> Result<()> {
    if x.len() != w.n() {
        return Err(Error::Parameter(alloc::format!(
            "{} values for {} regions",
            x.len(),
            w.n()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Parameter("Moran's I needs n >= 3".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value".into()));
    }
    if w.islands().len() == w.n() {
        return Err(Error::DegenerateWeights("every region is an island".into()));
    }
    Ok(())
}

/// `zᵀ W z` by sparse accumulation.
fn cross_product(z: &[f64], w: &SpatialWeights) -> f64 {
    (0..w.n())
        .map(|i| z[i] * w.row(i).map(|(j, wij)| wij * z[j]).sum::<f64>())
        .sum()
}

fn normal_deviate(statistic: f64, w: &SpatialWeights) -> f64 {
    let n = w.n() as f64;
    let s0 = w.s0();
    let weight = |i: usize, j: usize| {
        w.neighbors(i)
            .binary_search(&j)
            .map(|k| w.weights[i][k])
            .unwrap_or(0.0)
    };
    // S1 = ½ Σ_ij (w_ij + w_ji)² over ordered pairs; a pair with w_ji = 0 is
    // only reached through w_ij, so its mirror term is added explicitly.
    let mut s1 = 0.0;
    let mut out = alloc::vec![0.0; w.n()];
    let mut inn = alloc::vec![0.0; w.n()];
    for (i, j, wij) in w.triplets() {
        let wji = weight(j, i);
        s1 += (wij + wji).powi(2);
        if wji == 0.0 {
            s1 += wij * wij;
        }
        out[i] += wij;
        inn[j] += wij;
    }
    let s1 = 0.5 * s1;
    let s2: f64 = out.iter().zip(&inn).map(|(a, b)| (a + b).powi(2)).sum();
    let expected = -1.0 / (n - 1.0);
    let var = (n * n * s1 - n * s2 + 3.0 * s0 * s0) / ((n * n - 1.0) * s0 * s0) - expected * expected;
    if var > 0.0 {
        (statistic - expected) / var.sqrt()
    } else {
        0.0
    }
}

/// `I = (n / S0) · zᵀWz / zᵀz` with `z = x − x̄`.
pub fn morans_i(x: &[f64], w: &SpatialWeights) -> Result<MoranResult> {
    check_inputs(x, w)?;
    let (z, zz) = centered(x)?;
    let n = x.len() as f64;
    let statistic = n / w.s0() * cross_product(&z, w) / zz;
    Ok(MoranResult {
        statistic,
        expected: -1.0 / (n - 1.0),
        z_norm: normal_deviate(statistic, w),
        perm: None,
    })
}

pub(crate) fn check_permutations(n_perm: usize) -> Result<()> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::Parameter(alloc::format!(
            "n_perm must be at least {MIN_PERMUTATIONS}, got {n_perm}"
        )));
    }
    Ok(())
}

/// True when `dev` is at least as extreme as `observed`, allowing for
/// rounding in ties.
pub(crate) fn as_extreme(dev: f64, observed: f64) -> bool {
    dev >= observed - 1e-12 * observed.max(1e-300)
}

/// Moran's I with a two-sided permutation pseudo p-value around E[I].
/// Permutation `k` draws from substream `k` of `seed`.
pub fn permutation_test(
    x: &[f64],
    w: &SpatialWeights,
    n_perm: usize,
    seed: u64,
) -> Result<MoranResult> {
    check_permutations(n_perm)?;
    let mut result = morans_i(x, w)?;
    let (z, zz) = centered(x)?;
    let scale = x.len() as f64 / w.s0() / zz;
    let observed = (result.statistic - result.expected).abs();

    let mut buf = z.clone();
    let mut extreme = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..n_perm {
        buf.copy_from_slice(&z);
        buf.shuffle(&mut substream(seed, k as u64));
        let stat = scale * cross_product(&buf, w);
        if as_extreme((stat - result.expected).abs(), observed) {
            extreme += 1;
        }
        sum += stat;
        sum_sq += stat * stat;
    }
    let m = n_perm as f64;
    let perm_mean = sum / m;
    let perm_sd = ((sum_sq - m * perm_mean * perm_mean) / (m - 1.0)).max(0.0).sqrt();
    result.perm = Some(PermutationInference {
        n_perm,
        pseudo_p: (1 + extreme) as f64 / (1 + n_perm) as f64,
        perm_mean,
        perm_sd,
        seed,
    });
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub z: f64,
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranScatter {
    pub points: Vec<ScatterPoint>,
    /// Least-squares slope through the origin of `lag` on `z`.
    pub slope: f64,
}

/// Values standardized with the population (divide-by-n) moments.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let (z, zz) = centered(x)?;
    let sd = (zz / x.len() as f64).sqrt();
    Ok(z.into_iter().map(|v| v / sd).collect())
}

pub fn moran_scatter(x: &[f64], w: &SpatialWeights) -> Result<MoranScatter> {
    check_inputs(x, w)?;
    let z = standardize(x)?;
    let lag = w.lag(&z);
    let zl: f64 = z.iter().zip(&lag).map(|(a, b)| a * b).sum();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    Ok(MoranScatter {
        points: z
            .iter()
            .zip(&lag)
            .map(|(&z, &lag)| ScatterPoint { z, lag })
            .collect(),
        slope: zl / zz,
    })
}
