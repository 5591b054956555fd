use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use verdoorn::config::{ConfigFile, RunConfig};
use verdoorn::error::{Error, Result};
use verdoorn::fixture::{generate, DEFAULT_FIXTURE_SEED};
use verdoorn::io::{format_weights, load_inputs, write_atomic};
use verdoorn::pipeline::{cmd_pipeline, panel_weights, sweep, sweep_csv, PipelineReport};
use verdoorn::render::{render_ml_tables, render_ols_tables};
use verdoorn_core::diagnostics::estimate_verdoorn_ols;
use verdoorn_core::ingest::{build_growth_vectors, GrowthVector, Period, Sector};
use verdoorn_core::lisa::lisa;
use verdoorn_core::moran::{moran_scatter, permutation_test};
use verdoorn_core::spatial_ml::{fit_verdoorn, ModelKind};
use verdoorn_core::weights::SpatialWeights;

const EXIT_VALIDATION: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_FAILURE: u8 = 4;

/// Spatial econometrics of regional productivity growth: Moran and LISA
/// statistics, OLS with spatial diagnostics, specification search and ML
/// spatial lag / spatial error fits.
///
/// Inputs: a panel CSV `region,sector,year,output,employment` (comma or tab
/// delimited) and a centroid CSV `region,x,y,metric` with metric
/// `planar_km` or `latlon_deg` (x = longitude, y = latitude).
///
/// `pipeline` writes to the output directory: report.json, tables_ols.txt,
/// tables_ml.txt, weights.txt, moran_scatter_<cell>.csv (+ .json summary),
/// lisa_<cell>.csv and lisa_<cell>.json, where <cell> is
/// `<sector>_<start>-<end>`. `sweep` writes sweep.csv.
///
/// Exit codes: 0 success, 2 invalid input or configuration, 3 some cells
/// failed, 4 every cell failed.
#[derive(Parser)]
#[command(name = "verdoorn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every sector and period: Moran, LISA, OLS, specification search, ML fit.
    Pipeline(RunArgs),
    /// Global Moran's I of productivity growth for one cell.
    Moran(CellArgs),
    /// Local Moran statistics and cluster labels for one cell.
    Lisa(CellArgs),
    /// OLS with the diagnostic battery for one cell.
    Ols(CellArgs),
    /// ML spatial lag fit for one cell.
    Lag(CellArgs),
    /// ML spatial error fit for one cell.
    Error(CellArgs),
    /// Global Moran's I over a list of distance thresholds (writes sweep.csv).
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated, ascending, in km.
        #[arg(long, value_delimiter = ',', default_values_t = vec![50.0, 97.0, 150.0, 200.0, 300.0])]
        thresholds: Vec<f64>,
    },
    /// Write a synthetic 28-region panel, centroids and a manifest of the
    /// planted parameters.
    Fixture {
        #[arg(long, default_value_t = DEFAULT_FIXTURE_SEED)]
        seed: u64,
        #[arg(long, default_value = "fixture")]
        out: PathBuf,
    },
    /// Re-render the text tables from a report.json.
    Render {
        report: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    coords: Option<PathBuf>,
    /// Distance band in km (default 97).
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated START-END periods (default 1995-1999,2000-2005).
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<String>>,
    /// Comma-separated sector filter.
    #[arg(long, value_delimiter = ',')]
    sectors: Option<Vec<String>>,
    /// Significance level (default 0.05).
    #[arg(long)]
    alpha: Option<f64>,
    /// Permutations (default 999, at least 99).
    #[arg(long)]
    n_perm: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CellArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    sector: String,
    /// START-END; defaults to the first configured period.
    #[arg(long)]
    period: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            panel_path: self.panel.clone(),
            coords_path: self.coords.clone(),
            threshold_km: self.threshold,
            periods: self.periods.clone(),
            sectors: self.sectors.clone(),
            alpha: self.alpha,
            n_perm: self.n_perm,
            seed: self.seed,
            output_dir: self.out.clone(),
        };
        RunConfig::from_file(file.merge(flags))
    }
}

struct Cell {
    config: RunConfig,
    gv: GrowthVector,
    w: SpatialWeights,
}

impl CellArgs {
    fn load(&self) -> Result<Cell> {
        let config = self.run.resolve()?;
        let sector: Sector = self.sector.parse().map_err(|e: verdoorn_core::error::Error| Error::Config(e.to_string()))?;
        let period: Period = match &self.period {
            Some(p) => p.parse().map_err(|e: verdoorn_core::error::Error| Error::Config(e.to_string()))?,
            None => config.periods[0],
        };
        let panel = load_inputs(&config.panel_path, &config.coords_path)?;
        if !panel.has_sector(sector) {
            return Err(Error::Config(format!("sector {sector} not in panel")));
        }
        let gv = build_growth_vectors(&panel, sector, period)?;
        let w = panel_weights(&panel, config.threshold_km)?;
        Ok(Cell { config, gv, w })
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Pipeline(args) => {
            let config = args.resolve()?;
            let report = cmd_pipeline(&config)?;
            let failed = report.failures();
            for c in report.cells.iter().filter(|c| c.failed()) {
                eprintln!("{}: {}", c.name(), c.error.as_deref().unwrap_or(""));
            }
            eprintln!(
                "{} cells, {} failed; outputs in {}",
                report.cells.len(),
                failed,
                config.output_dir.display()
            );
            Ok(if failed == 0 {
                0
            } else if failed == report.cells.len() {
                EXIT_FAILURE
            } else {
                EXIT_PARTIAL
            })
        }
        Command::Moran(args) => {
            let c = args.load()?;
            let m = permutation_test(&c.gv.p, &c.w, c.config.n_perm, c.config.seed)?;
            let scatter = moran_scatter(&c.gv.p, &c.w)?;
            ensure_dir(&c.config.output_dir)?;
            let mut csv = String::from("region,z,lag\n");
            for (r, p) in c.gv.regions.iter().zip(&scatter.points) {
                csv.push_str(&format!("{r},{},{}\n", p.z, p.lag));
            }
            let name = verdoorn::pipeline::cell_name(c.gv.sector, c.gv.period);
            write_atomic(&c.config.output_dir.join(format!("moran_scatter_{name}.csv")), csv.as_bytes())?;
            let perm = m.perm.as_ref();
            println!(
                "{}",
                serde_json::json!({
                    "I": m.statistic,
                    "expected": m.expected,
                    "pseudo_p": perm.map(|p| p.pseudo_p),
                    "n_perm": perm.map(|p| p.n_perm),
                    "seed": perm.map(|p| p.seed),
                })
            );
            Ok(0)
        }
        Command::Lisa(args) => {
            let c = args.load()?;
            let l = lisa(&c.gv.p, &c.w, c.config.alpha, c.config.n_perm, c.config.seed)?;
            println!("region,z,lag,I_local,pseudo_p,cluster");
            for (r, s) in c.gv.regions.iter().zip(&l.regions) {
                println!("{r},{},{},{},{},{}", s.z, s.lag, s.i_local, s.pseudo_p, s.cluster.label());
            }
            Ok(0)
        }
        Command::Ols(args) => {
            let c = args.load()?;
            print_json(&estimate_verdoorn_ols(&c.gv, &c.w, c.config.n_perm, c.config.seed)?)?;
            Ok(0)
        }
        Command::Lag(args) => {
            let c = args.load()?;
            print_json(&fit_verdoorn(ModelKind::Lag, &c.gv, &c.w)?)?;
            Ok(0)
        }
        Command::Error(args) => {
            let c = args.load()?;
            print_json(&fit_verdoorn(ModelKind::Error, &c.gv, &c.w)?)?;
            Ok(0)
        }
        Command::Sweep { run, thresholds } => {
            let config = run.resolve()?;
            let panel = load_inputs(&config.panel_path, &config.coords_path)?;
            let rows = sweep(&panel, &config, &thresholds)?;
            ensure_dir(&config.output_dir)?;
            let csv = sweep_csv(&rows);
            write_atomic(&config.output_dir.join("sweep.csv"), csv.as_bytes())?;
            print!("{csv}");
            Ok(0)
        }
        Command::Fixture { seed, out } => {
            let f = generate(seed)?;
            f.write(&out)?;
            let w = SpatialWeights::build(
                &f.manifest.regions,
                &f.coords.iter().map(|c| c.1).collect::<Vec<_>>(),
                f.manifest.threshold_km,
            )?;
            write_atomic(&out.join("weights.txt"), format_weights(&w).as_bytes())?;
            eprintln!("fixture written to {}", out.display());
            Ok(0)
        }
        Command::Render { report } => {
            let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let r: PipelineReport = serde_json::from_str(&text)?;
            print!("{}\n{}", render_ols_tables(&r), render_ml_tables(&r));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_FAILURE })
        }
    }
}
