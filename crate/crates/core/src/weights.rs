//! Distance-band spatial weights with row standardization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use once_cell::race::OnceBox;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PlanarKm,
    LatlonDeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum Coordinate {
    PlanarKm { x: f64, y: f64 },
    LatlonDeg { lat: f64, lon: f64 },
}

impl Coordinate {
    pub fn metric(&self) -> Metric {
        match self {
            Coordinate::PlanarKm { .. } => Metric::PlanarKm,
            Coordinate::LatlonDeg { .. } => Metric::LatlonDeg,
        }
    }
}

/// Kilometers between two points: Euclidean for planar coordinates,
/// haversine great-circle for latitude/longitude.
pub fn distance(a: &Coordinate, b: &Coordinate) -> Result<f64> {
    match (a, b) {
        (Coordinate::PlanarKm { x: x1, y: y1 }, Coordinate::PlanarKm { x: x2, y: y2 }) => {
            Ok((x1 - x2).hypot(y1 - y2))
        }
        (
            Coordinate::LatlonDeg { lat: la1, lon: lo1 },
            Coordinate::LatlonDeg { lat: la2, lon: lo2 },
        ) => {
            let (p1, p2) = (la1.to_radians(), la2.to_radians());
            let dlat = p2 - p1;
            let dlon = (lo2 - lo1).to_radians();
            let h = (dlat / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlon / 2.0).sin().powi(2);
            Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
        }
        _ => Err(Error::MixedMetrics),
    }
}

/// Binary distance-band adjacency: `i` and `j` are neighbors when
/// `0 < d(i, j) <= threshold`, or when distinct regions share a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandAdjacency {
    pub n: usize,
    pub ordering: Vec<String>,
    pub threshold_km: f64,
    /// Sorted neighbor indices per row.
    pub neighbors: Vec<Vec<usize>>,
    /// Distances aligned with `neighbors`; empty when imported without them.
    pub distances: Vec<Vec<f64>>,
    pub islands: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn distance_band(
    ordering: &[String],
    coords: &[Coordinate],
    threshold_km: f64,
) -> Result<BandAdjacency> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 regions, got {n}")));
    }
    if ordering.len() != n {
        return Err(Error::Parameter(format!(
            "{} region ids for {n} coordinates",
            ordering.len()
        )));
    }
    if !(threshold_km > 0.0) || !threshold_km.is_finite() {
        return Err(Error::Parameter(format!(
            "threshold must be positive, got {threshold_km}"
        )));
    }
    let mut neighbors = vec![Vec::new(); n];
    let mut distances = vec![Vec::new(); n];
    let mut warnings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distance(&coords[i], &coords[j])?;
            if d == 0.0 {
                warnings.push(format!(
                    "regions '{}' and '{}' share coordinates",
                    ordering[i], ordering[j]
                ));
            }
            if d <= threshold_km {
                neighbors[i].push(j);
                distances[i].push(d);
                neighbors[j].push(i);
                distances[j].push(d);
            }
        }
    }
    // row i receives j < i while earlier rows are visited, then j > i in order
    let islands = (0..n).filter(|&i| neighbors[i].is_empty()).collect();
    Ok(BandAdjacency {
        n,
        ordering: ordering.to_vec(),
        threshold_km,
        neighbors,
        distances,
        islands,
        warnings,
    })
}

/// Row-standardized spatial weights built on a symmetric binary adjacency.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpatialWeights {
    pub adjacency: BandAdjacency,
    /// Standardized weights aligned with `adjacency.neighbors`.
    pub weights: Vec<Vec<f64>>,
    #[serde(skip)]
    spectrum: OnceBox<Spectrum>,
}

impl Clone for SpatialWeights {
    fn clone(&self) -> Self {
        SpatialWeights {
            adjacency: self.adjacency.clone(),
            weights: self.weights.clone(),
            spectrum: OnceBox::new(),
        }
    }
}

impl PartialEq for SpatialWeights {
    fn eq(&self, other: &Self) -> bool {
        self.adjacency == other.adjacency && self.weights == other.weights
    }
}

/// `w*_ij = w_ij / Σ_k w_ik`; island rows stay empty.
pub fn row_standardize(adjacency: BandAdjacency) -> SpatialWeights {
    let weights = adjacency
        .neighbors
        .iter()
        .map(|row| {
            let k = row.len() as f64;
            vec![1.0 / k; row.len()]
        })
        .collect();
    SpatialWeights {
        adjacency,
        weights,
        spectrum: OnceBox::new(),
    }
}

impl SpatialWeights {
    pub fn build(ordering: &[String], coords: &[Coordinate], threshold_km: f64) -> Result<Self> {
        Ok(row_standardize(distance_band(ordering, coords, threshold_km)?))
    }

    /// Rebuilds weights from standardized triplets. The nonzero pattern
    /// becomes the binary adjacency.
    pub fn from_triplets(
        ordering: Vec<String>,
        threshold_km: f64,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = ordering.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(Error::Parameter(format!("index ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::Parameter(format!("self-neighbor at {i}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Parameter(format!("non-positive weight at ({i}, {j})")));
            }
            rows[i].push((j, w));
        }
        let mut neighbors = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::Parameter("duplicate entry in weights".into()));
            }
            neighbors.push(row.iter().map(|&(j, _)| j).collect::<Vec<_>>());
            weights.push(row.iter().map(|&(_, w)| w).collect::<Vec<_>>());
        }
        let islands = (0..n).filter(|&i| neighbors[i].is_empty()).collect();
        Ok(SpatialWeights {
            adjacency: BandAdjacency {
                n,
                ordering,
                threshold_km,
                neighbors,
                distances: Vec::new(),
                islands,
                warnings: Vec::new(),
            },
            weights,
            spectrum: OnceBox::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.n
    }

    pub fn islands(&self) -> &[usize] {
        &self.adjacency.islands
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency.neighbors[i]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.neighbors[i]
            .iter()
            .copied()
            .zip(self.weights[i].iter().copied())
    }

    /// Nonzero entries as `(i, j, w_ij)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    /// `W v`
    pub fn lag(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.row(i).map(|(j, w)| w * v[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n(), self.n());
        for (i, j, w) in self.triplets() {
            m[(i, j)] = w;
        }
        m
    }

    pub fn binary_is_symmetric(&self) -> bool {
        let nb = &self.adjacency.neighbors;
        (0..self.n()).all(|i| nb[i].iter().all(|&j| nb[j].binary_search(&i).is_ok()))
    }

    /// Real spectrum of W, computed on first use and cached.
    pub fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = Spectrum::compute(self)?;
        Ok(self.spectrum.get_or_init(|| alloc::boxed::Box::new(s)))
    }
}

/// Eigenvalues of a row-standardized W derived from a symmetric binary
/// adjacency B. W = D⁻¹B is similar to D^{-1/2} B D^{-1/2}, so the spectrum
/// is real. Island rows contribute zero eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl Spectrum {
    pub const MAX_DENSE_N: usize = 2000;

    pub fn compute(w: &SpatialWeights) -> Result<Self> {
        let n = w.n();
        if n > Self::MAX_DENSE_N {
            return Err(Error::Parameter(format!(
                "eigenvalue path supports n <= {}, got {n}",
                Self::MAX_DENSE_N
            )));
        }
        if !w.binary_is_symmetric() {
            return Err(Error::DegenerateWeights(
                "binary adjacency is not symmetric; spectrum is not guaranteed real".into(),
            ));
        }
        let active: Vec<usize> = (0..n).filter(|&i| !w.neighbors(i).is_empty()).collect();
        if active.is_empty() {
            return Err(Error::DegenerateWeights("every region is an island".into()));
        }
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in active.iter().enumerate() {
            pos[i] = k;
        }
        let degree: Vec<f64> = active.iter().map(|&i| w.neighbors(i).len() as f64).collect();
        for &i in &active {
            let k = w.neighbors(i).len() as f64;
            if w.weights[i].iter().any(|&x| (x * k - 1.0).abs() > 1e-12) {
                return Err(Error::DegenerateWeights(
                    "weights are not a row-standardized binary matrix".into(),
                ));
            }
        }
        let m = active.len();
        let mut s = DMatrix::zeros(m, m);
        for (a, &i) in active.iter().enumerate() {
            for &j in w.neighbors(i) {
                let b = pos[j];
                s[(a, b)] = 1.0 / (degree[a] * degree[b]).sqrt();
            }
        }
        let mut eigenvalues: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.extend(core::iter::repeat_n(0.0, n - m));
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        let min = eigenvalues[0];
        let max = eigenvalues[n - 1];
        if !(min < 0.0 && max > 0.0) {
            return Err(Error::DegenerateWeights(format!(
                "spectrum [{min}, {max}] does not straddle zero"
            )));
        }
        Ok(Spectrum {
            eigenvalues,
            min,
            max,
        })
    }

    /// Admissible open interval `(1/ω_min, 1/ω_max)` for ρ or λ.
    pub fn bounds(&self) -> (f64, f64) {
        (1.0 / self.min, 1.0 / self.max)
    }

    /// `ln |I − ρW| = Σ ln(1 − ρ ω_i)`
    pub fn log_det(&self, rho: f64) -> f64 {
        self.eigenvalues.iter().map(|&w| (1.0 - rho * w).ln()).sum()
    }

    /// `tr(W (I − ρW)⁻¹)` and `tr([W (I − ρW)⁻¹]²)` from the spectrum.
    pub fn traces(&self, rho: f64) -> (f64, f64) {
        self.eigenvalues.iter().fold((0.0, 0.0), |(t1, t2), &w| {
            let r = w / (1.0 - rho * w);
            (t1 + r, t2 + r * r)
        })
    }
}
