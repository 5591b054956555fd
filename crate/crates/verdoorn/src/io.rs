//! Delimited-text readers for the panel and centroid files, and the
//! plain-text weights format.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use verdoorn_core::error::Error as CoreError;
use verdoorn_core::ingest::{Record, RegionalPanel, Sector};
use verdoorn_core::weights::{Coordinate, SpatialWeights};

use crate::error::{Error, Result};

/// Column names for the panel file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub region: String,
    pub sector: String,
    pub year: String,
    pub output: String,
    pub employment: String,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            region: "region".into(),
            sector: "sector".into(),
            year: "year".into(),
            output: "output".into(),
            employment: "employment".into(),
        }
    }
}

/// Tab when the header line has tabs and no commas, comma otherwise.
fn sniff_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.contains('\t') && !header.contains(',') {
        b'\t'
    } else {
        b','
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(text))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| CoreError::Schema(format!("missing column '{name}'")).into())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn field<'r>(rec: &'r csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<&'r str> {
    match rec.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("empty '{name}'"),
        }),
    }
}

fn number<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<T> {
    let raw = field(rec, idx, line, name)?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{raw}' is not a valid {name}"),
    })
}

pub fn parse_panel(text: &str, schema: &PanelSchema) -> Result<RegionalPanel> {
    if text.trim().is_empty() {
        return Err(CoreError::Schema("empty panel input".into()).into());
    }
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = [
        column(&headers, &schema.region)?,
        column(&headers, &schema.sector)?,
        column(&headers, &schema.year)?,
        column(&headers, &schema.output)?,
        column(&headers, &schema.employment)?,
    ];
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let sector: Sector = field(&rec, cols[1], line, "sector")?
            .parse()
            .map_err(|e: CoreError| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        records.push(Record {
            region: field(&rec, cols[0], line, "region")?.to_string(),
            sector,
            year: number(&rec, cols[2], line, "year")?,
            output: number(&rec, cols[3], line, "output")?,
            employment: number(&rec, cols[4], line, "employment")?,
            line: line as usize,
        });
    }
    Ok(RegionalPanel::from_records(records)?)
}

pub fn load_panel(mut source: impl Read, schema: &PanelSchema) -> Result<RegionalPanel> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<panel>", e))?;
    parse_panel(&text, schema)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_panel_path(path: &Path) -> Result<RegionalPanel> {
    parse_panel(&read_text(path)?, &PanelSchema::default())
}

/// `region,x,y,metric`. For `latlon_deg`, `x` is longitude and `y` latitude.
pub fn parse_coords(text: &str) -> Result<Vec<(String, Coordinate)>> {
    if text.trim().is_empty() {
        return Err(CoreError::Schema("empty coordinates input".into()).into());
    }
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = [
        column(&headers, "region")?,
        column(&headers, "x")?,
        column(&headers, "y")?,
        column(&headers, "metric")?,
    ];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let region = field(&rec, cols[0], line, "region")?.to_string();
        let x: f64 = number(&rec, cols[1], line, "x")?;
        let y: f64 = number(&rec, cols[2], line, "y")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parse {
                line,
                message: "non-finite coordinate".into(),
            });
        }
        let coord = match field(&rec, cols[3], line, "metric")? {
            "planar_km" => Coordinate::PlanarKm { x, y },
            "latlon_deg" => Coordinate::LatlonDeg { lat: y, lon: x },
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown metric '{other}'"),
                })
            }
        };
        if out.iter().any(|(r, _)| *r == region) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate region '{region}'"),
            });
        }
        out.push((region, coord));
    }
    Ok(out)
}

pub fn load_coords_path(path: &Path) -> Result<Vec<(String, Coordinate)>> {
    parse_coords(&read_text(path)?)
}

/// Panel with its centroids attached.
pub fn load_inputs(panel: &Path, coords: &Path) -> Result<RegionalPanel> {
    let mut p = load_panel_path(panel)?;
    p.attach_coords(&load_coords_path(coords)?)?;
    Ok(p)
}

/// Header `n threshold_km`, then `i j w` per nonzero with 17 significant
/// digits, which reproduces every weight bit for bit.
pub fn format_weights(w: &SpatialWeights) -> String {
    let mut s = format!("{} {}\n", w.n(), w.adjacency.threshold_km);
    for (i, j, v) in w.triplets() {
        writeln!(s, "{i} {j} {v:.16e}").unwrap();
    }
    s
}

/// Inverse of [`format_weights`]. Region names come from the caller; when
/// absent, indices are used.
pub fn parse_weights(text: &str, ordering: Option<Vec<String>>) -> Result<SpatialWeights> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let bad = |line: usize, what: &str| Error::Parse {
        line: line as u64 + 1,
        message: what.to_string(),
    };
    let mut h = header.split_whitespace();
    let n: usize = h.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad(0, "bad region count"))?;
    let threshold: f64 = h.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad(0, "bad threshold"))?;
    let mut triplets = Vec::new();
    for (k, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad(k, "expected 'i j w'"));
        }
        let i = t[0].parse().map_err(|_| bad(k, "bad row index"))?;
        let j = t[1].parse().map_err(|_| bad(k, "bad column index"))?;
        let v = t[2].parse().map_err(|_| bad(k, "bad weight"))?;
        triplets.push((i, j, v));
    }
    let ordering = ordering.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
    if ordering.len() != n {
        return Err(Error::Config(format!(
            "weights file has {n} regions, ordering has {}",
            ordering.len()
        )));
    }
    Ok(SpatialWeights::from_triplets(ordering, threshold, &triplets)?)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PANEL: &str = "region,sector,year,output,employment
a,agriculture,2000,10,2
a,agriculture,2001,12,2
b,agriculture,2000,8,1
b,agriculture,2001,9,1
c,agriculture,2000,5,1
c,agriculture,2001,6,2
";

    #[test]
    fn reads_comma_and_tab() {
        let p = parse_panel(PANEL, &PanelSchema::default()).unwrap();
        assert_eq!(p.regions(), ["a", "b", "c"]);
        let tabbed = PANEL.replace(',', "\t");
        assert_eq!(parse_panel(&tabbed, &PanelSchema::default()).unwrap(), p);
    }

    #[test]
    fn custom_schema() {
        let text = PANEL.replacen("region", "nuts3", 1);
        assert!(parse_panel(&text, &PanelSchema::default()).is_err());
        let schema = PanelSchema {
            region: "nuts3".into(),
            ..PanelSchema::default()
        };
        assert_eq!(parse_panel(&text, &schema).unwrap().n(), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = PANEL.replace("b,agriculture,2001,9,1", "b,agriculture,2001,nine,1");
        match parse_panel(&text, &PanelSchema::default()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 5),
            e => panic!("{e}"),
        }
        let text = PANEL.replace("c,agriculture,2001,6,2", "c,agriculture,2001,6,0");
        let msg = parse_panel(&text, &PanelSchema::default()).unwrap_err().to_string();
        assert!(msg.contains("line 7"), "{msg}");
        assert!(matches!(
            parse_panel("", &PanelSchema::default()).unwrap_err(),
            Error::Core(CoreError::Schema(_))
        ));
        assert!(matches!(
            parse_panel("region,sector,year,output\n", &PanelSchema::default()).unwrap_err(),
            Error::Core(CoreError::Schema(_))
        ));
    }

    #[test]
    fn coords_metrics() {
        let c = parse_coords("region,x,y,metric\na,1,2,planar_km\nb,-8.5,41.1,latlon_deg\n").unwrap();
        assert_eq!(c[0].1, Coordinate::PlanarKm { x: 1.0, y: 2.0 });
        assert_eq!(c[1].1, Coordinate::LatlonDeg { lat: 41.1, lon: -8.5 });
        assert!(parse_coords("region,x,y,metric\na,1,2,miles\n").is_err());
    }

    #[test]
    fn weights_round_trip_bit_exact() {
        let ids: Vec<String> = (0..7).map(|i| format!("r{i}")).collect();
        let coords: Vec<Coordinate> = (0..7)
            .map(|i| Coordinate::PlanarKm {
                x: (i as f64 * 1.7).sin() * 10.0,
                y: (i as f64 * 0.9).cos() * 10.0,
            })
            .collect();
        let w = SpatialWeights::build(&ids, &coords, 9.5).unwrap();
        let text = format_weights(&w);
        let back = parse_weights(&text, Some(ids.clone())).unwrap();
        assert_eq!(back.n(), w.n());
        for i in 0..w.n() {
            assert_eq!(back.neighbors(i), w.neighbors(i));
            for (a, b) in back.weights[i].iter().zip(&w.weights[i]) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert_eq!(format_weights(&back), text);
        assert!(parse_weights(&text, Some(ids[..3].to_vec())).is_err());
    }
}
