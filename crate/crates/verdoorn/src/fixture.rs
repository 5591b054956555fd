//! Synthetic 28-region panel with planted spatial structure.
//!
//! Centroids approximate the mainland Portuguese NUTS III regions, projected
//! to kilometres. For every sector and period, output growth `q` and
//! productivity growth `p` are drawn from a known model (OLS, spatial lag or
//! spatial error), and annual levels are laid out so that the average log
//! growth between the period endpoints equals the drawn values.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use verdoorn_core::ingest::{Period, Record, Sector};
use verdoorn_core::specsearch::Choice;
use verdoorn_core::weights::{Coordinate, SpatialWeights};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const DEFAULT_FIXTURE_SEED: u64 = 43;
const THRESHOLD_KM: f64 = 97.0;
const LAT0: f64 = 39.5;
const LON0: f64 = -8.0;
/// Wavelength of the services growth pattern along the Lisbon-Centro axis.
const PATTERN_KM: f64 = 280.0;
const BUMP_KM: f64 = 70.0;
const BUMP_HEIGHT: f64 = 1.5;

pub const REGIONS: [(&str, f64, f64); 28] = [
    ("Minho-Lima", 41.85, -8.55),
    ("Cavado", 41.60, -8.40),
    ("Ave", 41.45, -8.25),
    ("Grande Porto", 41.20, -8.55),
    ("Tamega", 41.20, -8.10),
    ("Entre Douro e Vouga", 40.95, -8.45),
    ("Douro", 41.15, -7.55),
    ("Alto Tras-os-Montes", 41.70, -6.95),
    ("Baixo Vouga", 40.65, -8.55),
    ("Baixo Mondego", 40.20, -8.55),
    ("Pinhal Litoral", 39.85, -8.85),
    ("Pinhal Interior Norte", 40.10, -8.20),
    ("Dao-Lafoes", 40.70, -7.90),
    ("Pinhal Interior Sul", 39.80, -7.90),
    ("Serra da Estrela", 40.45, -7.55),
    ("Beira Interior Norte", 40.65, -7.05),
    ("Beira Interior Sul", 39.85, -7.35),
    ("Cova da Beira", 40.20, -7.45),
    ("Oeste", 39.30, -9.20),
    ("Medio Tejo", 39.50, -8.30),
    ("Grande Lisboa", 38.80, -9.20),
    ("Peninsula de Setubal", 38.55, -8.95),
    ("Leziria do Tejo", 39.15, -8.65),
    ("Alentejo Litoral", 38.00, -8.60),
    ("Alto Alentejo", 39.20, -7.60),
    ("Alentejo Central", 38.60, -7.85),
    ("Baixo Alentejo", 37.90, -7.85),
    ("Algarve", 37.20, -8.15),
];

const LISBON: usize = 20;
const CENTRO: usize = 14;

/// Equirectangular projection around the centre of the mainland.
pub fn planar(lat: f64, lon: f64) -> (f64, f64) {
    (
        (lon - LON0) * 111.32 * LAT0.to_radians().cos(),
        (lat - LAT0) * 110.57,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDgp {
    pub sector: Sector,
    pub period: Period,
    pub model: Choice,
    pub alpha: f64,
    pub gamma: f64,
    /// ρ for the lag model, λ for the error model, 0 otherwise.
    pub spatial: f64,
    pub noise_sd: f64,
    /// Weight of the Lisbon-Centro wave in output growth.
    pub pattern: f64,
}

pub fn planted_cells() -> Vec<CellDgp> {
    let p1 = Period { start: 1995, end: 1999 };
    let p2 = Period { start: 2000, end: 2005 };
    let cell = |sector, period, model, alpha, gamma, spatial, pattern| CellDgp {
        sector,
        period,
        model,
        alpha,
        gamma,
        spatial,
        noise_sd: 0.006,
        pattern,
    };
    vec![
        cell(Sector::Agriculture, p1, Choice::Error, 0.012, 0.85, 0.9, 0.0),
        cell(Sector::Industry, p1, Choice::Ols, -0.025, 0.95, 0.0, 0.0),
        cell(Sector::Services, p1, Choice::Lag, 0.015, 0.35, 0.75, 1.0),
        cell(Sector::Total, p1, Choice::Ols, 0.002, 0.65, 0.0, 0.0),
        cell(Sector::Agriculture, p2, Choice::Ols, -0.01, 0.65, 0.0, 0.0),
        cell(Sector::Industry, p2, Choice::Lag, 0.015, 0.65, -0.8, 0.0),
        cell(Sector::Services, p2, Choice::Lag, -0.008, 0.5, 0.75, 1.0),
        cell(Sector::Total, p2, Choice::Error, 0.001, 0.55, 0.9, 0.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub threshold_km: f64,
    pub regions: Vec<String>,
    pub cells: Vec<CellDgp>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub records: Vec<Record>,
    pub coords: Vec<(String, Coordinate)>,
    pub manifest: Manifest,
}

pub fn coordinates() -> Vec<(String, Coordinate)> {
    REGIONS
        .iter()
        .map(|&(name, lat, lon)| {
            let (x, y) = planar(lat, lon);
            (name.to_string(), Coordinate::PlanarKm { x, y })
        })
        .collect()
}

fn weights(coords: &[(String, Coordinate)]) -> Result<SpatialWeights> {
    let ids: Vec<String> = coords.iter().map(|c| c.0.clone()).collect();
    let pts: Vec<Coordinate> = coords.iter().map(|c| c.1).collect();
    Ok(SpatialWeights::build(&ids, &pts, THRESHOLD_KM)?)
}

/// `(I − cW)⁻¹ r` by fixed-point iteration; `|c| < 1` and unit row sums make
/// the map a contraction.
fn spatial_solve(w: &SpatialWeights, c: f64, r: &[f64]) -> Vec<f64> {
    let mut y = r.to_vec();
    for _ in 0..400 {
        let wy = w.lag(&y);
        y = r.iter().zip(wy).map(|(a, b)| a + c * b).collect();
    }
    y
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn standardized(v: Vec<f64>) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    v.into_iter().map(|x| (x - m) / sd).collect()
}

/// Cosine wave along the axis from Lisbon towards the Centro interior, plus a
/// Gaussian bump on Lisbon so its neighbourhood reads as a hot spot.
/// Standardized.
fn wave(coords: &[(String, Coordinate)]) -> Vec<f64> {
    let xy: Vec<(f64, f64)> = coords
        .iter()
        .map(|c| match c.1 {
            Coordinate::PlanarKm { x, y } => (x, y),
            Coordinate::LatlonDeg { lat, lon } => planar(lat, lon),
        })
        .collect();
    let (lx, ly) = xy[LISBON];
    let (dx, dy) = (xy[CENTRO].0 - lx, xy[CENTRO].1 - ly);
    let len = dx.hypot(dy);
    standardized(
        xy.iter()
            .map(|&(x, y)| {
                let s = ((x - lx) * dx + (y - ly) * dy) / len;
                let r = (x - lx).hypot(y - ly) / BUMP_KM;
                (2.0 * std::f64::consts::PI * s / PATTERN_KM).cos() + BUMP_HEIGHT * (-0.5 * r * r).exp()
            })
            .collect(),
    )
}

/// Growth rates `(p, q)` for one planted cell.
pub fn draw_cell(rng: &mut ChaCha8Rng, w: &SpatialWeights, wave: &[f64], cell: &CellDgp) -> (Vec<f64>, Vec<f64>) {
    let n = w.n();
    let g = normals(rng, n);
    // mildly smooth output growth, as regional growth usually is
    let wg = w.lag(&g);
    let smooth = standardized(g.iter().zip(&wg).map(|(a, b)| a + 0.5 * b).collect());
    let z: Vec<f64> = (0..n).map(|i| cell.pattern * wave[i] + (1.0 - 0.6 * cell.pattern) * smooth[i]).collect();
    let q: Vec<f64> = z.iter().map(|v| 0.02 + 0.015 * v).collect();
    let e: Vec<f64> = normals(rng, n).iter().map(|v| cell.noise_sd * v).collect();
    let xb: Vec<f64> = q.iter().map(|v| cell.alpha + cell.gamma * v).collect();
    let p = match cell.model {
        Choice::Ols => xb.iter().zip(&e).map(|(a, b)| a + b).collect(),
        Choice::Lag => {
            let r: Vec<f64> = xb.iter().zip(&e).map(|(a, b)| a + b).collect();
            spatial_solve(w, cell.spatial, &r)
        }
        Choice::Error => {
            let u = spatial_solve(w, cell.spatial, &e);
            xb.iter().zip(&u).map(|(a, b)| a + b).collect()
        }
    };
    (p, q)
}

pub fn generate(seed: u64) -> Result<Fixture> {
    let coords = coordinates();
    let w = weights(&coords)?;
    let wave = wave(&coords);
    let cells = planted_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = coords.len();
    let mut records = Vec::new();
    let mut line = 2;
    for cell in &cells {
        let (p, q) = draw_cell(&mut rng, &w, &wave, cell);
        for i in 0..n {
            let ln_y0 = 4.0 + rng.random_range(0.0..2.0);
            let ln_l0 = 2.0 + rng.random_range(0.0..1.5);
            let span = cell.period.span();
            for k in 0..=span {
                let t = k as f64;
                // interior years wander; the endpoints pin the growth rates
                let (jy, jl) = if k == 0 || k == span {
                    (0.0, 0.0)
                } else {
                    (rng.random_range(-0.004..0.004), rng.random_range(-0.004..0.004))
                };
                let output = (ln_y0 + q[i] * t + jy).exp();
                let employment = (ln_l0 + (q[i] - p[i]) * t + jl).exp();
                records.push(Record {
                    region: coords[i].0.clone(),
                    sector: cell.sector,
                    year: cell.period.start + k,
                    output,
                    employment,
                    line,
                });
                line += 1;
            }
        }
    }
    Ok(Fixture {
        records,
        coords,
        manifest: Manifest {
            seed,
            threshold_km: THRESHOLD_KM,
            regions: REGIONS.iter().map(|r| r.0.to_string()).collect(),
            cells,
        },
    })
}

impl Fixture {
    pub fn panel_csv(&self) -> String {
        let mut s = String::from("region,sector,year,output,employment\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{},{},{}\n", r.region, r.sector, r.year, r.output, r.employment));
        }
        s
    }

    pub fn coords_csv(&self) -> String {
        let mut s = String::from("region,x,y,metric\n");
        for (name, c) in &self.coords {
            if let Coordinate::PlanarKm { x, y } = c {
                s.push_str(&format!("{name},{x},{y},planar_km\n"));
            }
        }
        s
    }

    /// Writes `panel.csv`, `coords.csv` and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("panel.csv"), self.panel_csv().as_bytes())?;
        write_atomic(&dir.join("coords.csv"), self.coords_csv().as_bytes())?;
        let manifest = serde_json::to_string_pretty(&self.manifest)?;
        write_atomic(&dir.join("manifest.json"), manifest.as_bytes())
    }
}
