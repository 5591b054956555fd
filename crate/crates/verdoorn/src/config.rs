//! Run configuration: a JSON file whose fields can be overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use verdoorn_core::ingest::{Period, RegionalPanel, Sector};
use verdoorn_core::moran::MIN_PERMUTATIONS;

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_KM: f64 = 97.0;
pub const DEFAULT_SEED: u64 = 20_090_101;

/// Configuration as written on disk; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub panel_path: Option<PathBuf>,
    pub coords_path: Option<PathBuf>,
    pub threshold_km: Option<f64>,
    /// `"1995-1999"` style strings.
    pub periods: Option<Vec<String>>,
    pub sectors: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub n_perm: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            panel_path: over.panel_path.or(self.panel_path),
            coords_path: over.coords_path.or(self.coords_path),
            threshold_km: over.threshold_km.or(self.threshold_km),
            periods: over.periods.or(self.periods),
            sectors: over.sectors.or(self.sectors),
            alpha: over.alpha.or(self.alpha),
            n_perm: over.n_perm.or(self.n_perm),
            seed: over.seed.or(self.seed),
            output_dir: over.output_dir.or(self.output_dir),
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub panel_path: PathBuf,
    pub coords_path: PathBuf,
    pub threshold_km: f64,
    pub periods: Vec<Period>,
    /// `None` runs every sector present in the panel.
    pub sectors: Option<Vec<Sector>>,
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
    /// Left out of serialized reports so output location does not change them.
    #[serde(skip_serializing, default)]
    pub output_dir: PathBuf,
}

pub fn default_periods() -> Vec<Period> {
    vec![Period { start: 1995, end: 1999 }, Period { start: 2000, end: 2005 }]
}

impl RunConfig {
    pub fn from_file(c: ConfigFile) -> Result<Self> {
        let periods = match c.periods {
            None => default_periods(),
            Some(v) => v
                .iter()
                .map(|s| s.parse::<Period>().map_err(|e| Error::Config(e.to_string())))
                .collect::<Result<_>>()?,
        };
        let sectors = match c.sectors {
            None => None,
            Some(v) => Some(
                v.iter()
                    .map(|s| s.parse::<Sector>().map_err(|e| Error::Config(e.to_string())))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let cfg = RunConfig {
            panel_path: c.panel_path.ok_or_else(|| Error::Config("panel_path is required".into()))?,
            coords_path: c.coords_path.ok_or_else(|| Error::Config("coords_path is required".into()))?,
            threshold_km: c.threshold_km.unwrap_or(DEFAULT_THRESHOLD_KM),
            periods,
            sectors,
            alpha: c.alpha.unwrap_or(verdoorn_core::specsearch::DEFAULT_ALPHA),
            n_perm: c.n_perm.unwrap_or(999),
            seed: c.seed.unwrap_or(DEFAULT_SEED),
            output_dir: c.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_km > 0.0 && self.threshold_km.is_finite()) {
            return Err(Error::Config(format!("threshold_km must be positive, got {}", self.threshold_km)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_perm < MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "n_perm must be at least {MIN_PERMUTATIONS}, got {}",
                self.n_perm
            )));
        }
        if self.periods.is_empty() {
            return Err(Error::Config("no periods configured".into()));
        }
        let mut sorted = self.periods.clone();
        sorted.sort();
        if sorted.windows(2).any(|p| p[1].start <= p[0].end) {
            return Err(Error::Config("periods overlap".into()));
        }
        if let Some(s) = &self.sectors {
            if s.is_empty() {
                return Err(Error::Config("empty sector filter".into()));
            }
        }
        Ok(())
    }

    /// Checks that periods fit the panel's years and requested sectors exist.
    pub fn check_against(&self, panel: &RegionalPanel) -> Result<()> {
        let (first, last) = panel.coverage();
        for p in &self.periods {
            if p.start < first || p.end > last {
                return Err(Error::Config(format!("period {p} outside data coverage {first}-{last}")));
            }
        }
        for s in self.sectors.iter().flatten() {
            if !panel.has_sector(*s) {
                return Err(Error::Config(format!("sector {s} not in panel")));
            }
        }
        Ok(())
    }

    pub fn sectors_for(&self, panel: &RegionalPanel) -> Vec<Sector> {
        match &self.sectors {
            Some(s) => s.clone(),
            None => Sector::ALL.iter().copied().filter(|s| panel.has_sector(*s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ConfigFile {
        ConfigFile {
            panel_path: Some("p.csv".into()),
            coords_path: Some("c.csv".into()),
            ..ConfigFile::default()
        }
    }

    #[test]
    fn defaults() {
        let c = RunConfig::from_file(base()).unwrap();
        assert_eq!(c.threshold_km, 97.0);
        assert_eq!(c.periods, default_periods());
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.n_perm, 999);
    }

    #[test]
    fn flags_win() {
        let file = ConfigFile {
            threshold_km: Some(50.0),
            seed: Some(1),
            ..base()
        };
        let flags = ConfigFile {
            threshold_km: Some(120.0),
            ..ConfigFile::default()
        };
        let c = RunConfig::from_file(file.merge(flags)).unwrap();
        assert_eq!((c.threshold_km, c.seed), (120.0, 1));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: ConfigFile| RunConfig::from_file(f).unwrap_err();
        assert!(matches!(bad(ConfigFile { sectors: Some(vec!["fishing".into()]), ..base() }), Error::Config(_)));
        assert!(matches!(bad(ConfigFile { n_perm: Some(50), ..base() }), Error::Config(_)));
        assert!(matches!(bad(ConfigFile { threshold_km: Some(0.0), ..base() }), Error::Config(_)));
        assert!(matches!(
            bad(ConfigFile { periods: Some(vec!["1995-2000".into(), "2000-2005".into()]), ..base() }),
            Error::Config(_)
        ));
        assert!(matches!(bad(ConfigFile::default()), Error::Config(_)));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"treshold_km": 5}"#).is_err());
    }
}
