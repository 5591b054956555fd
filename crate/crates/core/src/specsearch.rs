//! Classical specification search: screen with the plain LM tests, break
//! a double rejection with the robust tests.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{LmTests, OlsReport};
use crate::error::{Error, Result};
use crate::ingest::GrowthVector;
use crate::spatial_ml::{fit_verdoorn, ModelKind, SpatialFit};
use crate::stats::TestStat;
use crate::weights::SpatialWeights;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Choice {
    Ols,
    Lag,
    Error,
}

impl Choice {
    pub fn label(self) -> &'static str {
        match self {
            Choice::Ols => "OLS",
            Choice::Lag => "LAG",
            Choice::Error => "ERROR",
        }
    }

    pub fn model(self) -> Option<ModelKind> {
        match self {
            Choice::Ols => None,
            Choice::Lag => Some(ModelKind::Lag),
            Choice::Error => Some(ModelKind::Error),
        }
    }
}

/// Which rule of the decision tree produced the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    NeitherSignificant,
    OnlyLag,
    OnlyError,
    RobustComparison,
    /// Robust statistics equal; resolved to ERROR.
    RobustTie,
    /// Robust statistics unavailable; plain statistics compared instead.
    PlainFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDecision {
    pub choice: Choice,
    pub alpha: f64,
    pub evidence: LmTests,
    pub branch: Branch,
    pub narrative: Vec<String>,
}

fn describe(name: &str, s: &TestStat, alpha: f64) -> String {
    let verdict = if s.significant(alpha) { "significant" } else { "not significant" };
    format!("{name} = {:.3} (p = {:.4}): {verdict} at {alpha}", s.statistic, s.p_value)
}

/// Applies the decision tree to the four LM statistics.
pub fn decide_lm(lm: &LmTests, alpha: f64) -> Result<SpecDecision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    let mut narrative = alloc::vec![
        String::from("screen with plain LM tests; robust tests only break a double rejection"),
        describe("LM_lag", &lm.lm_lag, alpha),
        describe("LM_err", &lm.lm_err, alpha),
    ];
    let lag = lm.lm_lag.significant(alpha);
    let err = lm.lm_err.significant(alpha);
    let (choice, branch) = match (lag, err) {
        (false, false) => {
            narrative.push("neither plain test significant: keep OLS".into());
            (Choice::Ols, Branch::NeitherSignificant)
        }
        (true, false) => {
            narrative.push("only LM_lag significant: spatial lag".into());
            (Choice::Lag, Branch::OnlyLag)
        }
        (false, true) => {
            narrative.push("only LM_err significant: spatial error".into());
            (Choice::Error, Branch::OnlyError)
        }
        (true, true) => match lm.robust() {
            Ok((rl, re)) => {
                narrative.push(describe("robust LM_lag", &rl, alpha));
                narrative.push(describe("robust LM_err", &re, alpha));
                if rl.statistic > re.statistic {
                    narrative.push("both plain tests significant; robust LM_lag larger: spatial lag".into());
                    (Choice::Lag, Branch::RobustComparison)
                } else if re.statistic > rl.statistic {
                    narrative.push("both plain tests significant; robust LM_err larger: spatial error".into());
                    (Choice::Error, Branch::RobustComparison)
                } else {
                    narrative.push("both plain tests significant; robust statistics tie: spatial error by convention".into());
                    (Choice::Error, Branch::RobustTie)
                }
            }
            Err(e) => {
                narrative.push(format!("warning: {e}; comparing plain statistics instead"));
                if lm.lm_lag.statistic > lm.lm_err.statistic {
                    narrative.push("LM_lag larger: spatial lag".into());
                    (Choice::Lag, Branch::PlainFallback)
                } else {
                    narrative.push("LM_err at least as large: spatial error".into());
                    (Choice::Error, Branch::PlainFallback)
                }
            }
        },
    };
    Ok(SpecDecision {
        choice,
        alpha,
        evidence: lm.clone(),
        branch,
        narrative,
    })
}

pub fn decide(report: &OlsReport, alpha: f64) -> Result<SpecDecision> {
    let lm = report
        .lm
        .as_ref()
        .ok_or_else(|| Error::Parameter("OLS report carries no LM statistics".into()))?;
    decide_lm(lm, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Selected {
    Ols(OlsReport),
    Spatial(SpatialFit),
}

/// The estimated model together with the decision that selected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub decision: SpecDecision,
    pub result: Selected,
}

pub fn run_selected(
    decision: &SpecDecision,
    report: &OlsReport,
    gv: &GrowthVector,
    w: &SpatialWeights,
) -> Result<Selection> {
    let result = match decision.choice.model() {
        None => Selected::Ols(report.clone()),
        Some(kind) => Selected::Spatial(fit_verdoorn(kind, gv, w)?),
    };
    Ok(Selection {
        decision: decision.clone(),
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::estimate_verdoorn_ols;
    use crate::ingest::{Period, Sector};
    use crate::spatial_ml::tests::{lag_dgp, lattice};
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn lm(l: f64, rl: f64, e: f64, re: f64) -> LmTests {
        LmTests::from_statistics(l, e, Some(rl), Some(re))
    }

    #[test]
    fn published_rows() {
        // (LM_lag, robust LM_lag, LM_err, robust LM_err) → narrated choice
        let rows = [
            (0.416, 7.111, 8.774, 15.469, Choice::Error),
            (1.122, 2.317, 0.109, 1.304, Choice::Ols),
            (4.749, 1.987, 3.607, 0.846, Choice::Lag),
            (0.008, 0.087, 0.069, 0.149, Choice::Ols),
            (0.771, 0.030, 0.940, 0.198, Choice::Ols),
            (8.742, 4.366, 4.444, 0.068, Choice::Lag),
            (5.976, 1.998, 4.102, 0.124, Choice::Lag),
            (5.215, 1.146, 9.462, 5.393, Choice::Error),
        ];
        for (l, rl, e, re, want) in rows {
            let d = decide_lm(&lm(l, rl, e, re), DEFAULT_ALPHA).unwrap();
            assert_eq!(d.choice, want, "{l} {rl} {e} {re}: {:?}", d.narrative);
        }
    }

    #[test]
    fn services_first_period_goes_through_single_rejection() {
        // LM_err = 3.607 has p ≈ 0.058, above 0.05
        let d = decide_lm(&lm(4.749, 1.987, 3.607, 0.846), 0.05).unwrap();
        assert_eq!(d.branch, Branch::OnlyLag);
        assert!((d.evidence.lm_err.p_value - 0.0576).abs() < 5e-4);
        // at 10% both reject and the robust comparison still picks the lag
        let d = decide_lm(&lm(4.749, 1.987, 3.607, 0.846), 0.10).unwrap();
        assert_eq!((d.choice, d.branch), (Choice::Lag, Branch::RobustComparison));
    }

    #[test]
    fn robust_tie_goes_to_error() {
        let d = decide_lm(&lm(6.0, 2.5, 7.0, 2.5), 0.05).unwrap();
        assert_eq!((d.choice, d.branch), (Choice::Error, Branch::RobustTie));
        assert!(d.narrative.iter().any(|s| s.contains("tie")));
    }

    #[test]
    fn degenerate_robust_falls_back() {
        let l = LmTests::from_statistics(9.0, 5.0, None, None);
        let d = decide_lm(&l, 0.05).unwrap();
        assert_eq!((d.choice, d.branch), (Choice::Lag, Branch::PlainFallback));
        assert!(d.narrative.iter().any(|s| s.starts_with("warning")));
    }

    #[test]
    fn invalid_alpha() {
        assert!(decide_lm(&lm(1.0, 1.0, 1.0, 1.0), 0.0).is_err());
        assert!(decide_lm(&lm(1.0, 1.0, 1.0, 1.0), 1.5).is_err());
    }

    #[test]
    fn dispatch() {
        let w = lattice(6);
        let (p, q) = lag_dgp(&w, 0.6, 0.0, 0.5, 3);
        let gv = GrowthVector {
            sector: Sector::Services,
            period: Period::new(2000, 2005).unwrap(),
            regions: (0..36).map(|i| i.to_string()).collect(),
            p,
            q,
        };
        let rep = estimate_verdoorn_ols(&gv, &w, 99, 0).unwrap();
        let mut d = decide(&rep, 0.05).unwrap();
        assert_eq!(d.evidence, *rep.lm.as_ref().unwrap());
        d.choice = Choice::Lag;
        match run_selected(&d, &rep, &gv, &w).unwrap().result {
            Selected::Spatial(f) => assert_eq!(f.kind, ModelKind::Lag),
            other => panic!("{other:?}"),
        }
        d.choice = Choice::Ols;
        assert_eq!(run_selected(&d, &rep, &gv, &w).unwrap().result, Selected::Ols(rep.clone()));
    }

    proptest! {
        #[test]
        fn ols_iff_neither_plain_significant(l in 0.0f64..12.0, e in 0.0f64..12.0, rl in 0.0f64..12.0, re in 0.0f64..12.0, alpha in 0.01f64..0.2) {
            let t = lm(l, rl, e, re);
            let d = decide_lm(&t, alpha).unwrap();
            let neither = !t.lm_lag.significant(alpha) && !t.lm_err.significant(alpha);
            prop_assert_eq!(d.choice == Choice::Ols, neither);
            prop_assert_eq!(decide_lm(&t, alpha).unwrap(), d);
        }

        #[test]
        fn relaxing_alpha_never_returns_to_ols(l in 0.0f64..12.0, e in 0.0f64..12.0, rl in 0.0f64..12.0, re in 0.0f64..12.0, a in 0.01f64..0.1, b in 0.0f64..0.2) {
            let t = lm(l, rl, e, re);
            let strict = decide_lm(&t, a).unwrap();
            let loose = decide_lm(&t, a + b).unwrap();
            if strict.choice != Choice::Ols {
                prop_assert!(loose.choice != Choice::Ols);
            }
        }
    }
}
