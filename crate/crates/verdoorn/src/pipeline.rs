//! End-to-end run over every sector and period, and the threshold sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use verdoorn_core::diagnostics::{estimate_verdoorn_ols, OlsReport};
use verdoorn_core::ingest::{build_growth_vectors, GrowthVector, Period, RegionalPanel, Sector};
use verdoorn_core::lisa::{lisa, LisaResult};
use verdoorn_core::moran::{moran_scatter, permutation_test, MoranResult};
use verdoorn_core::spatial_ml::{fit_verdoorn, SpatialFit};
use verdoorn_core::specsearch::{decide, SpecDecision};
use verdoorn_core::weights::{Coordinate, SpatialWeights};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{format_weights, load_inputs, write_atomic};
use crate::render::{render_ml_tables, render_ols_tables};

/// Everything computed for one (sector, period) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub sector: Sector,
    pub period: Period,
    pub moran: Option<MoranResult>,
    pub lisa: Option<LisaResult>,
    pub ols: Option<OlsReport>,
    pub decision: Option<SpecDecision>,
    pub spatial: Option<SpatialFit>,
    /// Set when the cell failed; earlier stages that succeeded are kept.
    pub error: Option<String>,
}

impl CellReport {
    pub fn name(&self) -> String {
        cell_name(self.sector, self.period)
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

pub fn cell_name(sector: Sector, period: Period) -> String {
    format!("{}_{}", sector.name(), period)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub config: RunConfig,
    pub regions: Vec<String>,
    pub islands: Vec<String>,
    pub weights_warnings: Vec<String>,
    pub growth_rate: String,
    pub ml_r2: String,
    pub z_values: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub metadata: RunMetadata,
    pub cells: Vec<CellReport>,
}

impl PipelineReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }
}

/// Weights for the panel's centroids at a threshold.
pub fn panel_weights(panel: &RegionalPanel, threshold_km: f64) -> Result<SpatialWeights> {
    let coords: &[Coordinate] = panel
        .coords()
        .ok_or_else(|| Error::Config("panel has no coordinates attached".into()))?;
    Ok(SpatialWeights::build(panel.regions(), coords, threshold_km)?)
}

/// Runs every stage for one cell. Each stage's output is kept even when a
/// later one fails.
pub fn run_cell(
    gv: &GrowthVector,
    w: &SpatialWeights,
    alpha: f64,
    n_perm: usize,
    seed: u64,
) -> CellReport {
    let mut cell = CellReport {
        sector: gv.sector,
        period: gv.period,
        moran: None,
        lisa: None,
        ols: None,
        decision: None,
        spatial: None,
        error: None,
    };
    let mut errors = Vec::new();
    match permutation_test(&gv.p, w, n_perm, seed) {
        Ok(m) => cell.moran = Some(m),
        Err(e) => errors.push(format!("moran: {e}")),
    }
    match lisa(&gv.p, w, alpha, n_perm, seed) {
        Ok(l) => cell.lisa = Some(l),
        Err(e) => errors.push(format!("lisa: {e}")),
    }
    let result = (|| -> Result<()> {
        let ols = estimate_verdoorn_ols(gv, w, n_perm, seed)?;
        cell.ols = Some(ols.clone());
        let decision = decide(&ols, alpha)?;
        cell.decision = Some(decision.clone());
        if let Some(kind) = decision.choice.model() {
            cell.spatial = Some(fit_verdoorn(kind, gv, w)?);
        }
        Ok(())
    })();
    if let Err(e) = result {
        errors.push(e.to_string());
    }
    if !errors.is_empty() {
        cell.error = Some(errors.join("; "));
    }
    cell
}

pub fn run_panel(panel: &RegionalPanel, config: &RunConfig) -> Result<(PipelineReport, SpatialWeights)> {
    config.check_against(panel)?;
    let w = panel_weights(panel, config.threshold_km)?;
    let mut cells = Vec::new();
    for period in &config.periods {
        for sector in config.sectors_for(panel) {
            let cell = match build_growth_vectors(panel, sector, *period) {
                Ok(gv) => run_cell(&gv, &w, config.alpha, config.n_perm, config.seed),
                Err(e) => CellReport {
                    sector,
                    period: *period,
                    moran: None,
                    lisa: None,
                    ols: None,
                    decision: None,
                    spatial: None,
                    error: Some(format!("growth: {e}")),
                },
            };
            cells.push(cell);
        }
    }
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        regions: panel.regions().to_vec(),
        islands: w.islands().iter().map(|&i| panel.regions()[i].clone()).collect(),
        weights_warnings: w.adjacency.warnings.clone(),
        growth_rate: "(ln x_end - ln x_start) / (end - start)".into(),
        ml_r2: "squared correlation of predicted and observed growth".into(),
        z_values: "asymptotic z from the information matrix for ML fits; t for OLS".into(),
    };
    Ok((PipelineReport { metadata, cells }, w))
}

fn scatter_csv(gv: &GrowthVector, w: &SpatialWeights) -> Result<String> {
    let s = moran_scatter(&gv.p, w)?;
    let mut out = String::from("region,z,lag\n");
    for (r, pt) in gv.regions.iter().zip(&s.points) {
        writeln!(out, "{r},{},{}", pt.z, pt.lag).unwrap();
    }
    Ok(out)
}

fn lisa_files(regions: &[String], l: &LisaResult) -> Result<(String, String)> {
    let mut csv = String::from("region,z,lag,I_local,pseudo_p,cluster\n");
    let mut map = serde_json::Map::new();
    for (r, s) in regions.iter().zip(&l.regions) {
        writeln!(csv, "{r},{},{},{},{},{}", s.z, s.lag, s.i_local, s.pseudo_p, s.cluster.label()).unwrap();
        map.insert(r.clone(), serde_json::Value::String(s.cluster.label().into()));
    }
    Ok((csv, serde_json::to_string_pretty(&map)?))
}

/// Writes every output file for a finished run.
pub fn write_outputs(
    dir: &Path,
    panel: &RegionalPanel,
    report: &PipelineReport,
    w: &SpatialWeights,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(report)?.as_bytes())?;
    write_atomic(&dir.join("weights.txt"), format_weights(w).as_bytes())?;
    write_atomic(&dir.join("tables_ols.txt"), render_ols_tables(report).as_bytes())?;
    write_atomic(&dir.join("tables_ml.txt"), render_ml_tables(report).as_bytes())?;
    for cell in &report.cells {
        let name = cell.name();
        let Ok(gv) = build_growth_vectors(panel, cell.sector, cell.period) else {
            continue;
        };
        if let Some(m) = &cell.moran {
            if let Ok(csv) = scatter_csv(&gv, w) {
                write_atomic(&dir.join(format!("moran_scatter_{name}.csv")), csv.as_bytes())?;
            }
            let summary = serde_json::json!({
                "I": m.statistic,
                "expected": m.expected,
                "pseudo_p": m.perm.as_ref().map(|p| p.pseudo_p),
                "n_perm": m.perm.as_ref().map(|p| p.n_perm),
                "seed": m.perm.as_ref().map(|p| p.seed),
            });
            write_atomic(&dir.join(format!("moran_scatter_{name}.json")), format!("{summary}\n").as_bytes())?;
        }
        if let Some(l) = &cell.lisa {
            let (csv, json) = lisa_files(&gv.regions, l)?;
            write_atomic(&dir.join(format!("lisa_{name}.csv")), csv.as_bytes())?;
            write_atomic(&dir.join(format!("lisa_{name}.json")), json.as_bytes())?;
        }
    }
    Ok(())
}

/// Loads inputs, runs every cell and writes the outputs.
pub fn cmd_pipeline(config: &RunConfig) -> Result<PipelineReport> {
    let panel = load_inputs(&config.panel_path, &config.coords_path)?;
    let (report, w) = run_panel(&panel, config)?;
    write_outputs(&config.output_dir, &panel, &report, &w)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub sector: Sector,
    pub period: Period,
    /// `None` when every region is an island.
    pub moran_i: Option<f64>,
    pub pseudo_p: Option<f64>,
    pub islands: usize,
}

/// Global Moran's I of productivity growth at each threshold.
pub fn sweep(panel: &RegionalPanel, config: &RunConfig, thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    if thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("thresholds must be positive".into()));
    }
    if thresholds.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::Config("thresholds must be sorted".into()));
    }
    config.check_against(panel)?;
    let mut rows = Vec::new();
    for &t in thresholds {
        let w = panel_weights(panel, t)?;
        for period in &config.periods {
            for sector in config.sectors_for(panel) {
                let gv = build_growth_vectors(panel, sector, *period)?;
                let m = if w.islands().len() == w.n() {
                    None
                } else {
                    Some(permutation_test(&gv.p, &w, config.n_perm, config.seed)?)
                };
                rows.push(SweepRow {
                    threshold: t,
                    sector,
                    period: *period,
                    moran_i: m.as_ref().map(|m| m.statistic),
                    pseudo_p: m.as_ref().and_then(|m| m.perm.as_ref().map(|p| p.pseudo_p)),
                    islands: w.islands().len(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("threshold,sector,period,I,pseudo_p,islands\n");
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.threshold,
            r.sector,
            r.period,
            na(r.moran_i),
            na(r.pseudo_p),
            r.islands
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_periods, DEFAULT_SEED};
    use crate::fixture::{generate, DEFAULT_FIXTURE_SEED};
    use crate::io::{parse_coords, parse_panel, PanelSchema};
    use verdoorn_core::diagnostics::lm_tests;
    use verdoorn_core::ols::intercept_design;

    fn fixture_panel() -> RegionalPanel {
        let f = generate(DEFAULT_FIXTURE_SEED).unwrap();
        let mut p = parse_panel(&f.panel_csv(), &PanelSchema::default()).unwrap();
        p.attach_coords(&parse_coords(&f.coords_csv()).unwrap()).unwrap();
        p
    }

    fn config() -> RunConfig {
        RunConfig {
            panel_path: "unused".into(),
            coords_path: "unused".into(),
            threshold_km: 97.0,
            periods: default_periods(),
            sectors: None,
            alpha: 0.05,
            n_perm: 199,
            seed: DEFAULT_SEED,
            output_dir: "unused".into(),
        }
    }

    #[test]
    fn report_agrees_with_modules() {
        let panel = fixture_panel();
        let cfg = config();
        let (report, w) = run_panel(&panel, &cfg).unwrap();
        assert_eq!(report.cells.len(), 8);
        for cell in &report.cells {
            assert!(!cell.failed(), "{}: {:?}", cell.name(), cell.error);
            assert_eq!(cell.spatial.is_some(), cell.decision.as_ref().unwrap().choice.model().is_some());
            let gv = build_growth_vectors(&panel, cell.sector, cell.period).unwrap();
            let lm = lm_tests(&gv.p, &intercept_design(&gv.q), &w).unwrap();
            assert_eq!(cell.ols.as_ref().unwrap().lm.as_ref().unwrap(), &lm);
            let m = permutation_test(&gv.p, &w, cfg.n_perm, cfg.seed).unwrap();
            assert_eq!(cell.moran.as_ref().unwrap(), &m);
        }
    }

    #[test]
    fn sweep_single_threshold_matches_pipeline() {
        let panel = fixture_panel();
        let cfg = config();
        let (report, _) = run_panel(&panel, &cfg).unwrap();
        let rows = sweep(&panel, &cfg, &[97.0]).unwrap();
        for (row, cell) in rows.iter().zip(&report.cells) {
            assert_eq!((row.sector, row.period), (cell.sector, cell.period));
            assert_eq!(row.moran_i, Some(cell.moran.as_ref().unwrap().statistic));
        }
    }

    #[test]
    fn all_island_threshold_reports_na() {
        let panel = fixture_panel();
        let rows = sweep(&panel, &config(), &[1.0]).unwrap();
        assert!(rows.iter().all(|r| r.moran_i.is_none() && r.islands == 28));
        assert!(sweep_csv(&rows).lines().nth(1).unwrap().contains(",NA,NA,28"));
        assert!(sweep(&panel, &config(), &[97.0, 50.0]).is_err());
    }

    #[test]
    fn failing_cell_is_isolated() {
        let panel = fixture_panel();
        let w = panel_weights(&panel, 97.0).unwrap();
        let gv = build_growth_vectors(&panel, Sector::Industry, default_periods()[0]).unwrap();
        let good = run_cell(&gv, &w, 0.05, 199, 1);
        let mut broken = gv.clone();
        broken.p = vec![0.01; 28];
        broken.q = vec![0.02; 28];
        let bad = run_cell(&broken, &w, 0.05, 199, 1);
        assert!(bad.failed() && !good.failed());
        assert_eq!(run_cell(&gv, &w, 0.05, 199, 1), good);
    }
}
