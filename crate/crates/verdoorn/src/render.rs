//! Fixed-width text tables for OLS and ML results.
//!
//! Coefficients print as `value[stars] (statistic)` with three decimals;
//! `*` marks p ≤ 0.05 and `**` marks 0.05 < p ≤ 0.10. Statistics in
//! parentheses carry no stars.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use verdoorn_core::diagnostics::OlsReport;
use verdoorn_core::ingest::{Period, Sector};
use verdoorn_core::spatial_ml::SpatialFit;
use verdoorn_core::stats::TestStat;

use crate::pipeline::PipelineReport;

pub const OLS_HEADERS: [&str; 12] = [
    "Con.", "Coef.", "JB", "BP", "KB", "M'I", "LM_l", "LMR_l", "LM_e", "LMR_e", "R²", "N.O.",
];
pub const ML_HEADERS: [&str; 6] = [
    "Constant",
    "Coefficient",
    "Coefficient^(S)",
    "Breusch-Pagan",
    "R²",
    "N.Observations",
];

pub fn stars(p: f64) -> &'static str {
    if p <= 0.05 {
        "*"
    } else if p <= 0.10 {
        "**"
    } else {
        ""
    }
}

pub fn format_coef_cell(value: f64, stat: f64, p: f64) -> String {
    format!("{value:.3}{} ({stat:.3})", stars(p))
}

pub fn format_stat_cell(value: f64, p: f64) -> String {
    format!("{value:.3}{}", stars(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefCell {
    pub value: f64,
    /// t or z statistic.
    pub stat: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatCell {
    pub value: f64,
    pub p: f64,
}

impl From<TestStat> for StatCell {
    fn from(t: TestStat) -> Self {
        StatCell {
            value: t.statistic,
            p: t.p_value,
        }
    }
}

impl CoefCell {
    pub fn render(&self) -> String {
        format_coef_cell(self.value, self.stat, self.p)
    }
}

fn stat_text(c: &Option<StatCell>) -> String {
    c.map_or_else(|| "-".to_string(), |c| format_stat_cell(c.value, c.p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsRow {
    pub label: String,
    pub constant: CoefCell,
    pub coefficient: CoefCell,
    pub jb: Option<StatCell>,
    pub bp: Option<StatCell>,
    pub kb: Option<StatCell>,
    pub moran: Option<StatCell>,
    pub lm_lag: Option<StatCell>,
    pub rlm_lag: Option<StatCell>,
    pub lm_err: Option<StatCell>,
    pub rlm_err: Option<StatCell>,
    pub r2: f64,
    pub n: usize,
}

impl OlsRow {
    pub fn from_report(label: &str, r: &OlsReport) -> Self {
        let f = &r.fit;
        let coef = |i: usize| CoefCell {
            value: f.coefficients[i],
            stat: f.t_stats[i],
            p: f.p_values[i],
        };
        let lm = r.lm.as_ref();
        OlsRow {
            label: label.to_string(),
            constant: coef(0),
            coefficient: coef(1),
            jb: r.jb.map(Into::into),
            bp: r.bp.map(Into::into),
            kb: r.kb.map(Into::into),
            moran: r.residual_moran.as_ref().map(|m| StatCell {
                value: m.statistic,
                p: m.perm.as_ref().map_or(f64::NAN, |p| p.pseudo_p),
            }),
            lm_lag: lm.map(|l| l.lm_lag.into()),
            rlm_lag: lm.and_then(|l| l.rlm_lag).map(Into::into),
            lm_err: lm.map(|l| l.lm_err.into()),
            rlm_err: lm.and_then(|l| l.rlm_err).map(Into::into),
            r2: f.r2_adj,
            n: r.n_obs,
        }
    }

    pub fn cells(&self) -> Vec<String> {
        vec![
            self.constant.render(),
            self.coefficient.render(),
            stat_text(&self.jb),
            stat_text(&self.bp),
            stat_text(&self.kb),
            stat_text(&self.moran),
            stat_text(&self.lm_lag),
            stat_text(&self.rlm_lag),
            stat_text(&self.lm_err),
            stat_text(&self.rlm_err),
            format!("{:.3}", self.r2),
            self.n.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlRow {
    pub label: String,
    pub constant: CoefCell,
    pub coefficient: CoefCell,
    pub spatial: CoefCell,
    pub bp: Option<StatCell>,
    pub r2: f64,
    pub n: usize,
}

impl MlRow {
    pub fn from_fit(label: &str, f: &SpatialFit) -> Self {
        let cell = |e: &verdoorn_core::spatial_ml::Estimate| CoefCell {
            value: e.value,
            stat: e.z,
            p: e.p_value,
        };
        MlRow {
            label: label.to_string(),
            constant: cell(&f.beta[0]),
            coefficient: cell(&f.beta[1]),
            spatial: cell(&f.spatial_coef),
            bp: f.bp_spatial.map(Into::into),
            r2: f.pseudo_r2,
            n: f.n,
        }
    }

    pub fn cells(&self) -> Vec<String> {
        vec![
            self.constant.render(),
            self.coefficient.render(),
            self.spatial.render(),
            stat_text(&self.bp),
            format!("{:.3}", self.r2),
            self.n.to_string(),
        ]
    }
}

pub fn sector_label(s: Sector) -> &'static str {
    match s {
        Sector::Agriculture => "Agriculture",
        Sector::Industry => "Industry",
        Sector::Services => "Services",
        Sector::Total => "Total of sectors",
    }
}

/// Label column left-aligned, value columns right-aligned, two spaces apart.
pub fn render_table(title: &str, headers: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let width = |s: &str| s.chars().count();
    let mut widths: Vec<usize> = headers.iter().map(|h| width(h)).collect();
    let mut label_w = 0;
    for (label, cells) in rows {
        label_w = label_w.max(width(label));
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(width(c));
        }
    }
    let pad = |s: &str, w: usize, right: bool| {
        let fill = " ".repeat(w.saturating_sub(width(s)));
        if right {
            format!("{fill}{s}")
        } else {
            format!("{s}{fill}")
        }
    };
    let mut out = format!("{title}\n");
    let mut line = pad("", label_w, false);
    for (h, w) in headers.iter().zip(&widths) {
        line.push_str("  ");
        line.push_str(&pad(h, *w, true));
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for (label, cells) in rows {
        let mut line = pad(label, label_w, false);
        for (c, w) in cells.iter().zip(&widths) {
            line.push_str("  ");
            line.push_str(&pad(c, *w, true));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn render_ols_table(period: Period, rows: &[OlsRow]) -> String {
    let body: Vec<_> = rows.iter().map(|r| (r.label.clone(), r.cells())).collect();
    render_table(&format!("OLS estimates, {period}"), &OLS_HEADERS, &body)
}

pub fn render_ml_table(period: Period, rows: &[MlRow]) -> String {
    let body: Vec<_> = rows.iter().map(|r| (r.label.clone(), r.cells())).collect();
    render_table(&format!("ML estimates with spatial effects, {period}"), &ML_HEADERS, &body)
}

fn periods(report: &PipelineReport) -> Vec<Period> {
    let mut ps: Vec<Period> = report.cells.iter().map(|c| c.period).collect();
    ps.dedup();
    ps
}

const OLS_NOTE: &str = "t statistics in parentheses. *: p <= 0.05; **: p <= 0.10. \
M'I: Moran's I of the residuals with permutation p-value. R²: adjusted.";
const ML_NOTE: &str = "Asymptotic z statistics in parentheses. *: p <= 0.05; **: p <= 0.10. \
Coefficient^(S): spatial lag ρ or spatial error λ. R²: squared correlation of predicted and observed.";

pub fn render_ols_tables(report: &PipelineReport) -> String {
    let mut out = String::new();
    for period in periods(report) {
        let rows: Vec<OlsRow> = report
            .cells
            .iter()
            .filter(|c| c.period == period)
            .filter_map(|c| c.ols.as_ref().map(|o| OlsRow::from_report(sector_label(c.sector), o)))
            .collect();
        out.push_str(&render_ols_table(period, &rows));
        out.push('\n');
    }
    writeln!(out, "{OLS_NOTE}").unwrap();
    out
}

/// Cells that stayed with OLS have no row here.
pub fn render_ml_tables(report: &PipelineReport) -> String {
    let mut out = String::new();
    for period in periods(report) {
        let rows: Vec<MlRow> = report
            .cells
            .iter()
            .filter(|c| c.period == period)
            .filter_map(|c| {
                c.spatial.as_ref().map(|f| {
                    let label = format!("{} ({})", sector_label(c.sector), f.kind.label());
                    MlRow::from_fit(&label, f)
                })
            })
            .collect();
        if rows.is_empty() {
            writeln!(out, "ML estimates with spatial effects, {period}\n(no spatial model selected)\n").unwrap();
        } else {
            out.push_str(&render_ml_table(period, &rows));
            out.push('\n');
        }
    }
    writeln!(out, "{ML_NOTE}").unwrap();
    out
}
