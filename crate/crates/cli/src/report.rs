//! Machine-readable analysis report and its human-readable table rendering.
//! The JSON is byte-reproducible from config + seed: no timestamps, fixed
//! field order, provenance carried as a config hash.

use agrocausal::estimators::Method;
use agrocausal::refute::{RefutationReport, RefuterKind, UccHeatmap};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub package: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleEffect {
    pub ate: f64,
    pub mc_se: f64,
    pub n_mc: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRow {
    pub method: Method,
    pub ate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

/// One (estimator, refuter) cell: either a completed test or the error that
/// prevented it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefutationCell {
    pub estimator: Method,
    pub refuter: RefuterKind,
    pub result: Option<RefutationReport>,
    pub ucc: Option<UccCell>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UccCell {
    pub heatmap: UccHeatmap,
    /// The unperturbed-corner estimate; bit-equal to the point estimate.
    pub origin_ate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub adjustment_set: Vec<String>,
    pub adjustment_columns: Vec<String>,
    pub n_rows: usize,
    pub simulated: bool,
    pub oracle: Option<OracleEffect>,
    pub estimates: Vec<EstimateRow>,
    pub refutations: Vec<RefutationCell>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn cell(&self, method: Method, refuter: RefuterKind) -> Option<&RefutationCell> {
        self.refutations
            .iter()
            .find(|c| c.estimator == method && c.refuter == refuter)
    }

    /// Effect-table rendering: estimators as rows, interval/p columns, then
    /// one pass/fail column per refuter.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "adjustment set: {{{}}}\n",
            self.adjustment_set.join(", ")
        ));
        if let Some(o) = &self.oracle {
            out.push_str(&format!(
                "oracle ATE (simulated): {:.2} (mc se {:.2})\n",
                o.ate, o.mc_se
            ));
        }
        out.push('\n');

        let refuters: Vec<RefuterKind> = {
            let mut seen = Vec::new();
            for c in &self.refutations {
                if !seen.contains(&c.refuter) {
                    seen.push(c.refuter);
                }
            }
            seen
        };

        out.push_str(&format!(
            "{:<10} {:>10} {:>22} {:>8}",
            "method", "ATE", "95% CI", "p"
        ));
        for r in &refuters {
            let label = if *r == RefuterKind::Ucc { "ucc(mean)" } else { r.name() };
            out.push_str(&format!(" {label:>14}"));
        }
        out.push('\n');

        for e in &self.estimates {
            out.push_str(&format!(
                "{:<10} {:>10.2} {:>22} {:>8.3}",
                e.method.name(),
                e.ate,
                format!("[{:.2}, {:.2}]", e.ci_low, e.ci_high),
                e.p_value
            ));
            for r in &refuters {
                let text = match self.cell(e.method, *r) {
                    Some(c) => {
                        if let Some(rep) = &c.result {
                            format!(
                                "{}(p={:.2})",
                                if rep.passed { "pass" } else { "FAIL" },
                                rep.p_value
                            )
                        } else if let Some(u) = &c.ucc {
                            format!("{:.2}", u.heatmap.mean_ate)
                        } else {
                            format!("err: {}", c.error.as_deref().unwrap_or("?"))
                        }
                    }
                    None => "-".into(),
                };
                out.push_str(&format!(" {text:>14}"));
            }
            out.push('\n');
        }
        out
    }
}
