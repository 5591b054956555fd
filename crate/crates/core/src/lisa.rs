//! Local Moran statistics with conditional permutation inference and
//! cluster/outlier classification.

use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moran::{as_extreme, check_permutations, standardize};
use crate::rng::substream;
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Cluster {
    HH,
    LL,
    HL,
    LH,
    NS,
    Island,
}

impl Cluster {
    pub fn label(self) -> &'static str {
        match self {
            Cluster::HH => "HH",
            Cluster::LL => "LL",
            Cluster::HL => "HL",
            Cluster::LH => "LH",
            Cluster::NS => "NS",
            Cluster::Island => "ISLAND",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStat {
    pub i_local: f64,
    pub z: f64,
    pub lag: f64,
    pub pseudo_p: f64,
    pub cluster: Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LisaResult {
    pub regions: Vec<LocalStat>,
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
}

/// Standardized values, their spatial lags and `I_i = z_i · lag_i`.
pub struct LocalMoran {
    pub z: Vec<f64>,
    pub lag: Vec<f64>,
    pub i_local: Vec<f64>,
}

pub fn local_moran(x: &[f64], w: &SpatialWeights) -> Result<LocalMoran> {
    if x.len() != w.n() {
        return Err(Error::Parameter(alloc::format!(
            "{} values for {} regions",
            x.len(),
            w.n()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Parameter("local Moran needs n >= 3".into()));
    }
    let z = standardize(x)?;
    let lag = w.lag(&z);
    let i_local = z.iter().zip(&lag).map(|(a, b)| a * b).collect();
    Ok(LocalMoran { z, lag, i_local })
}

/// Conditional permutation pseudo p-values. For region `i`, `z_i` stays put
/// and its neighbors receive a random draw (without replacement) from the
/// other `n − 1` values; region `i` uses substream `i` of `seed`. Islands
/// get p = 1.
pub fn lisa_permutation(
    x: &[f64],
    w: &SpatialWeights,
    n_perm: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_permutations(n_perm)?;
    let lm = local_moran(x, w)?;
    Ok(conditional_p(&lm, w, n_perm, seed))
}

fn conditional_p(lm: &LocalMoran, w: &SpatialWeights, n_perm: usize, seed: u64) -> Vec<f64> {
    let n = lm.z.len();
    let total: f64 = lm.z.iter().sum();
    (0..n)
        .map(|i| {
            let k = w.neighbors(i).len();
            if k == 0 {
                return 1.0;
            }
            let zi = lm.z[i];
            let row_sum: f64 = w.weights[i].iter().sum();
            // mean of the other n − 1 values is (Σz − z_i)/(n − 1)
            let expected = zi * row_sum * (total - zi) / (n - 1) as f64;
            let observed = (lm.i_local[i] - expected).abs();
            let mut rng = substream(seed, i as u64);
            let mut extreme = 0usize;
            for _ in 0..n_perm {
                let draw = index::sample(&mut rng, n - 1, k);
                let lag: f64 = draw
                    .iter()
                    .zip(&w.weights[i])
                    .map(|(d, wij)| {
                        let j = if d >= i { d + 1 } else { d };
                        wij * lm.z[j]
                    })
                    .sum();
                if as_extreme((zi * lag - expected).abs(), observed) {
                    extreme += 1;
                }
            }
            (1 + extreme) as f64 / (1 + n_perm) as f64
        })
        .collect()
}

/// Quadrant label for a significant region. Zero `z` or `lag` has no
/// quadrant and is reported as not significant.
pub fn classify(z: f64, lag: f64, pseudo_p: f64, alpha: f64) -> Cluster {
    if pseudo_p > alpha {
        return Cluster::NS;
    }
    match (z, lag) {
        (z, l) if z > 0.0 && l > 0.0 => Cluster::HH,
        (z, l) if z < 0.0 && l < 0.0 => Cluster::LL,
        (z, l) if z > 0.0 && l < 0.0 => Cluster::HL,
        (z, l) if z < 0.0 && l > 0.0 => Cluster::LH,
        _ => Cluster::NS,
    }
}

pub fn lisa(x: &[f64], w: &SpatialWeights, alpha: f64, n_perm: usize, seed: u64) -> Result<LisaResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(alloc::format!("alpha must be in (0, 1), got {alpha}")));
    }
    check_permutations(n_perm)?;
    let lm = local_moran(x, w)?;
    let p = conditional_p(&lm, w, n_perm, seed);
    let regions = (0..lm.z.len())
        .map(|i| LocalStat {
            i_local: lm.i_local[i],
            z: lm.z[i],
            lag: lm.lag[i],
            pseudo_p: p[i],
            cluster: if w.neighbors(i).is_empty() {
                Cluster::Island
            } else {
                classify(lm.z[i], lm.lag[i], p[i], alpha)
            },
        })
        .collect();
    Ok(LisaResult {
        regions,
        alpha,
        n_perm,
        seed,
    })
}
