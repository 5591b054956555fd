//! Regional accounts: validated panel of sectoral output and employment,
//! productivity levels and period-average growth rates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::Coordinate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    Agriculture,
    Industry,
    Services,
    Total,
}

impl Sector {
    pub const ALL: [Sector; 4] = [
        Sector::Agriculture,
        Sector::Industry,
        Sector::Services,
        Sector::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::Agriculture => "agriculture",
            Sector::Industry => "industry",
            Sector::Services => "services",
            Sector::Total => "total",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agriculture" | "agri" => Ok(Sector::Agriculture),
            "industry" => Ok(Sector::Industry),
            "services" => Ok(Sector::Services),
            "total" | "all" | "total of sectors" => Ok(Sector::Total),
            other => Err(Error::Parameter(format!("unknown sector '{other}'"))),
        }
    }
}

/// Inclusive range of years; growth is measured between the two endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Period {
    pub start: i32,
    pub end: i32,
}

impl Period {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if end <= start {
            return Err(Error::Parameter(format!(
                "period {start}-{end} must span at least one year"
            )));
        }
        Ok(Period { start, end })
    }

    pub fn span(&self) -> i32 {
        self.end - self.start
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['-', ':'])
            .ok_or_else(|| Error::Parameter(format!("period '{s}' is not START-END")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::Parameter(format!("bad year in period '{s}'")))
        };
        Period::new(parse(a)?, parse(b)?)
    }
}

/// One parsed row of the accounts table. `line` is the 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub region: String,
    pub sector: Sector,
    pub year: i32,
    pub output: f64,
    pub employment: f64,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub output: f64,
    pub employment: f64,
}

/// Validated regional accounts with a frozen region ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalPanel {
    regions: Vec<String>,
    sectors: Vec<Sector>,
    first_year: i32,
    last_year: i32,
    observations: BTreeMap<(usize, Sector, i32), Level>,
    coords: Option<Vec<Coordinate>>,
}

impl RegionalPanel {
    /// Validates records: unique keys, positive employment, non-negative
    /// output, and full year coverage for every (region, sector) pair.
    /// Regions are ordered by first appearance.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = Record>,
    {
        let mut regions: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut lines: BTreeMap<(usize, Sector, i32), usize> = BTreeMap::new();
        let mut observations = BTreeMap::new();
        let mut sectors: Vec<Sector> = Vec::new();
        let (mut first_year, mut last_year) = (i32::MAX, i32::MIN);

        for rec in records {
            if !(rec.employment > 0.0) || !rec.employment.is_finite() {
                return Err(Error::Domain(format!(
                    "line {}: employment must be positive, got {} ({}, {}, {})",
                    rec.line, rec.employment, rec.region, rec.sector, rec.year
                )));
            }
            if !(rec.output >= 0.0) || !rec.output.is_finite() {
                return Err(Error::Domain(format!(
                    "line {}: output must be finite and non-negative, got {} ({}, {}, {})",
                    rec.line, rec.output, rec.region, rec.sector, rec.year
                )));
            }
            let r = *index.entry(rec.region.clone()).or_insert_with(|| {
                regions.push(rec.region.clone());
                regions.len() - 1
            });
            if !sectors.contains(&rec.sector) {
                sectors.push(rec.sector);
            }
            let key = (r, rec.sector, rec.year);
            if let Some(prev) = lines.insert(key, rec.line) {
                return Err(Error::Integrity(format!(
                    "line {}: duplicate key ({}, {}, {}) first seen on line {}",
                    rec.line, rec.region, rec.sector, rec.year, prev
                )));
            }
            observations.insert(
                key,
                Level {
                    output: rec.output,
                    employment: rec.employment,
                },
            );
            first_year = first_year.min(rec.year);
            last_year = last_year.max(rec.year);
        }

        if observations.is_empty() {
            return Err(Error::Schema("no observations".to_string()));
        }
        sectors.sort();

        for (r, name) in regions.iter().enumerate() {
            for &s in &sectors {
                for year in first_year..=last_year {
                    if !observations.contains_key(&(r, s, year)) {
                        return Err(Error::Integrity(format!(
                            "missing observation for ({name}, {s}, {year})"
                        )));
                    }
                }
            }
        }

        Ok(RegionalPanel {
            regions,
            sectors,
            first_year,
            last_year,
            observations,
            coords: None,
        })
    }

    /// Aligns coordinates to the panel's region ordering. Extra entries are
    /// ignored; a missing region is an error.
    pub fn attach_coords(&mut self, coords: &[(String, Coordinate)]) -> Result<()> {
        let lookup: BTreeMap<&str, Coordinate> =
            coords.iter().map(|(r, c)| (r.as_str(), *c)).collect();
        let aligned = self
            .regions
            .iter()
            .map(|r| {
                lookup
                    .get(r.as_str())
                    .copied()
                    .ok_or_else(|| Error::Integrity(format!("no coordinates for region '{r}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = aligned.first() {
            if aligned.iter().any(|c| c.metric() != first.metric()) {
                return Err(Error::MixedMetrics);
            }
        }
        self.coords = Some(aligned);
        Ok(())
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn n(&self) -> usize {
        self.regions.len()
    }

    /// Sectors present in the data (Total only when it was supplied).
    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn coverage(&self) -> (i32, i32) {
        (self.first_year, self.last_year)
    }

    pub fn coords(&self) -> Option<&[Coordinate]> {
        self.coords.as_deref()
    }

    pub fn observations(&self) -> &BTreeMap<(usize, Sector, i32), Level> {
        &self.observations
    }

    /// Level for a region/sector/year; Total is aggregated from the other
    /// sectors when it is not in the data.
    pub fn level(&self, region: usize, sector: Sector, year: i32) -> Result<Level> {
        if let Some(level) = self.observations.get(&(region, sector, year)) {
            return Ok(*level);
        }
        if sector == Sector::Total && !self.sectors.contains(&Sector::Total) {
            let mut sum = Level {
                output: 0.0,
                employment: 0.0,
            };
            let mut found = false;
            for s in [Sector::Agriculture, Sector::Industry, Sector::Services] {
                if let Some(l) = self.observations.get(&(region, s, year)) {
                    sum.output += l.output;
                    sum.employment += l.employment;
                    found = true;
                }
            }
            if found {
                return Ok(sum);
            }
        }
        Err(Error::Parameter(format!(
            "no data for ({}, {sector}, {year})",
            self.regions.get(region).map(String::as_str).unwrap_or("?")
        )))
    }

    /// True when the sector can be analysed (present, or Total derivable).
    pub fn has_sector(&self, sector: Sector) -> bool {
        self.sectors.contains(&sector) || (sector == Sector::Total && !self.sectors.is_empty())
    }
}

/// Product per worker for every observation.
pub fn productivity(panel: &RegionalPanel) -> Result<BTreeMap<(usize, Sector, i32), f64>> {
    panel
        .observations
        .iter()
        .map(|(&key, level)| {
            if !(level.employment > 0.0) {
                return Err(Error::Domain(format!(
                    "zero employment for ({}, {}, {})",
                    panel.regions[key.0], key.1, key.2
                )));
            }
            Ok((key, level.output / level.employment))
        })
        .collect()
}

/// Compound annual growth between the first and last entry of a series of
/// consecutive annual levels: `(ln last − ln first) / (len − 1)`.
pub fn avg_growth(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::Domain(format!(
            "growth needs at least 2 levels, got {}",
            series.len()
        )));
    }
    if let Some(bad) = series.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("non-positive level {bad} in series")));
    }
    let span = (series.len() - 1) as f64;
    Ok((series[series.len() - 1].ln() - series[0].ln()) / span)
}

/// Region-aligned growth of productivity (`p`) and output (`q`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthVector {
    pub sector: Sector,
    pub period: Period,
    pub regions: Vec<String>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl GrowthVector {
    pub fn n(&self) -> usize {
        self.p.len()
    }
}

pub fn build_growth_vectors(
    panel: &RegionalPanel,
    sector: Sector,
    period: Period,
) -> Result<GrowthVector> {
    if !panel.has_sector(sector) {
        return Err(Error::Parameter(format!("sector {sector} not in panel")));
    }
    let (lo, hi) = panel.coverage();
    if period.start < lo || period.end > hi {
        return Err(Error::Parameter(format!(
            "period {period} outside data coverage {lo}-{hi}"
        )));
    }
    let mut p = Vec::with_capacity(panel.n());
    let mut q = Vec::with_capacity(panel.n());
    for (r, name) in panel.regions.iter().enumerate() {
        let levels = (period.start..=period.end)
            .map(|year| panel.level(r, sector, year))
            .collect::<Result<Vec<_>>>()?;
        let output: Vec<f64> = levels.iter().map(|l| l.output).collect();
        let prod: Vec<f64> = levels.iter().map(|l| l.output / l.employment).collect();
        let ctx = |e: Error| match e {
            Error::Domain(m) => Error::Domain(format!("{name}/{sector}/{period}: {m}")),
            other => other,
        };
        q.push(avg_growth(&output).map_err(ctx)?);
        p.push(avg_growth(&prod).map_err(ctx)?);
    }
    Ok(GrowthVector {
        sector,
        period,
        regions: panel.regions.clone(),
        p,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn rec(region: &str, sector: Sector, year: i32, output: f64, employment: f64) -> Record {
        Record {
            region: region.to_string(),
            sector,
            year,
            output,
            employment,
            line: 0,
        }
    }

    #[test]
    fn productivity_ratios() {
        let panel = RegionalPanel::from_records(vec![
            rec("a", Sector::Industry, 2000, 100.0, 4.0),
            rec("b", Sector::Industry, 2000, 0.0, 5.0),
            rec("c", Sector::Industry, 2000, 121.0, 11.0),
        ])
        .unwrap();
        let prod = productivity(&panel).unwrap();
        assert_eq!(prod[&(0, Sector::Industry, 2000)], 25.0);
        assert_eq!(prod[&(1, Sector::Industry, 2000)], 0.0);
        assert_eq!(prod[&(2, Sector::Industry, 2000)], 11.0);
    }

    #[test]
    fn growth_examples() {
        assert_eq!(avg_growth(&[50.0, 50.0, 50.0]).unwrap(), 0.0);
        assert!((avg_growth(&[100.0, 200.0]).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        // ln(1.21)/2 = 0.0953101798...
        assert!((avg_growth(&[100.0, 110.0, 121.0]).unwrap() - 0.095_310_179_804_324_9).abs() < 1e-12);
        assert!(matches!(avg_growth(&[1.0]), Err(Error::Domain(_))));
        assert!(matches!(avg_growth(&[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(avg_growth(&[1.0, -2.0, 3.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn duplicate_key_is_integrity_error() {
        let err = RegionalPanel::from_records(vec![
            Record { line: 2, ..rec("a", Sector::Industry, 2000, 1.0, 1.0) },
            Record { line: 3, ..rec("a", Sector::Industry, 2000, 2.0, 1.0) },
        ])
        .unwrap_err();
        match err {
            Error::Integrity(m) => assert!(m.contains("line 3") && m.contains("line 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_employment_names_row() {
        let err = RegionalPanel::from_records(vec![Record {
            line: 7,
            ..rec("a", Sector::Services, 1999, 1.0, 0.0)
        }])
        .unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("line 7")));
    }

    #[test]
    fn empty_is_schema_error() {
        assert!(matches!(
            RegionalPanel::from_records(Vec::new()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn gap_in_years_is_rejected() {
        let err = RegionalPanel::from_records(vec![
            rec("a", Sector::Industry, 2000, 1.0, 1.0),
            rec("a", Sector::Industry, 2002, 1.0, 1.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Integrity(ref m) if m.contains("2001")));
    }

    #[test]
    fn doubling_output_constant_employment() {
        let mut rows = Vec::new();
        for (r, name) in ["north", "south"].iter().enumerate() {
            for (k, year) in (2000..=2004).enumerate() {
                rows.push(rec(name, Sector::Agriculture, year, (10.0 + r as f64) * 2f64.powi(k as i32), 3.0));
                rows.push(rec(name, Sector::Industry, year, 7.0, 2.0));
            }
        }
        let panel = RegionalPanel::from_records(rows).unwrap();
        let gv = build_growth_vectors(&panel, Sector::Agriculture, Period::new(2000, 2004).unwrap()).unwrap();
        for r in 0..2 {
            assert!((gv.q[r] - core::f64::consts::LN_2).abs() < 1e-14);
            assert!((gv.p[r] - gv.q[r]).abs() < 1e-14);
        }
        let flat = build_growth_vectors(&panel, Sector::Industry, Period::new(2000, 2004).unwrap()).unwrap();
        assert_eq!(flat.p, vec![0.0, 0.0]);
        assert_eq!(flat.q, vec![0.0, 0.0]);
    }

    #[test]
    fn total_is_aggregated_when_absent() {
        let rows = vec![
            rec("a", Sector::Agriculture, 2000, 10.0, 5.0),
            rec("a", Sector::Agriculture, 2001, 10.0, 5.0),
            rec("a", Sector::Industry, 2000, 30.0, 5.0),
            rec("a", Sector::Industry, 2001, 90.0, 5.0),
        ];
        let panel = RegionalPanel::from_records(rows).unwrap();
        let gv = build_growth_vectors(&panel, Sector::Total, Period::new(2000, 2001).unwrap()).unwrap();
        // aggregate output 40 -> 100 over constant 10 workers
        assert!((gv.q[0] - (100.0f64 / 40.0).ln()).abs() < 1e-15);
        assert!((gv.p[0] - (10.0f64 / 4.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn period_outside_coverage() {
        let panel = RegionalPanel::from_records(vec![
            rec("a", Sector::Industry, 2000, 1.0, 1.0),
            rec("a", Sector::Industry, 2001, 1.0, 1.0),
        ])
        .unwrap();
        assert!(build_growth_vectors(&panel, Sector::Industry, Period::new(1999, 2001).unwrap()).is_err());
        assert!(build_growth_vectors(&panel, Sector::Services, Period::new(2000, 2001).unwrap()).is_err());
    }

    #[test]
    fn first_appearance_ordering_survives_row_permutation() {
        let base = vec![
            rec("z", Sector::Industry, 2000, 2.0, 1.0),
            rec("a", Sector::Industry, 2000, 3.0, 1.0),
            rec("z", Sector::Industry, 2001, 4.0, 1.0),
            rec("a", Sector::Industry, 2001, 3.0, 1.0),
        ];
        let panel = RegionalPanel::from_records(base.clone()).unwrap();
        assert_eq!(panel.regions(), &["z".to_string(), "a".to_string()]);
        let mut shuffled = base;
        shuffled.swap(0, 3);
        let other = RegionalPanel::from_records(shuffled).unwrap();
        assert_eq!(other.regions(), &["a".to_string(), "z".to_string()]);
        let period = Period::new(2000, 2001).unwrap();
        let g1 = build_growth_vectors(&panel, Sector::Industry, period).unwrap();
        let g2 = build_growth_vectors(&other, Sector::Industry, period).unwrap();
        assert_eq!(g1.p[0], g2.p[1]);
        assert_eq!(g1.p[1], g2.p[0]);
    }

    #[test]
    fn parse_period_and_sector() {
        assert_eq!("1995-1999".parse::<Period>().unwrap(), Period { start: 1995, end: 1999 });
        assert!("1999-1995".parse::<Period>().is_err());
        assert_eq!("Services".parse::<Sector>().unwrap(), Sector::Services);
        assert!("fishing".parse::<Sector>().is_err());
    }

    proptest! {
        #[test]
        fn growth_is_scale_invariant(
            levels in proptest::collection::vec(0.01f64..1e6, 2..12),
            c in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = levels.iter().map(|v| v * c).collect();
            let a = avg_growth(&levels).unwrap();
            let b = avg_growth(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn constant_employment_gives_p_equal_q(
            outputs in proptest::collection::vec(1.0f64..1e4, 3),
            emp in 1.0f64..1e3,
        ) {
            let rows: Vec<Record> = outputs.iter().enumerate()
                .map(|(k, o)| rec("r", Sector::Services, 2000 + k as i32, *o, emp))
                .collect();
            let panel = RegionalPanel::from_records(rows).unwrap();
            let gv = build_growth_vectors(&panel, Sector::Services, Period::new(2000, 2002).unwrap()).unwrap();
            prop_assert!((gv.p[0] - gv.q[0]).abs() <= 1e-14);
        }
    }
}
