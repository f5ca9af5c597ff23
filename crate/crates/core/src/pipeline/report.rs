//! Evaluation report: per-series/per-method metrics, energy scores, the
//! ANOVA table, and flat CSV projections for plotting.

use crate::error::Result;
use crate::metrics::AnovaResult;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` marks the undefined-MASE case (zero naive error).
    pub mase24: Option<f64>,
    pub mase168: Option<f64>,
    /// Quantile loss keyed by level string ("0.1".."0.9").
    pub ql: BTreeMap<String, f64>,
    /// Winkler score keyed by confidence level ("0.6", "0.8").
    pub ws: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseAnova {
    pub method_a: String,
    pub method_b: String,
    pub f_statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub series: Vec<String>,
    pub methods: Vec<String>,
    /// metrics[series][method]
    pub metrics: BTreeMap<String, BTreeMap<String, SeriesMetrics>>,
    /// Mean per-step cross-sectional energy score by method.
    pub energy_score: BTreeMap<String, f64>,
    /// Flattened (series·horizon)-dimensional variant, when requested.
    pub energy_score_flat: Option<BTreeMap<String, f64>>,
    pub anova_overall: AnovaResult,
    pub anova_pairwise: Vec<PairwiseAnova>,
    /// Worst coherency residual of the evaluated scenarios by method.
    pub coherency: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat `series,method,metric,value` table; undefined MASE prints as
    /// the literal `undefined`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,method,metric,value\n");
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => x.to_string(),
            None => "undefined".to_string(),
        };
        for (series, methods) in &self.metrics {
            for (method, m) in methods {
                out.push_str(&format!("{series},{method},mae,{}\n", m.mae));
                out.push_str(&format!("{series},{method},rmse,{}\n", m.rmse));
                out.push_str(&format!(
                    "{series},{method},mase24,{}\n",
                    fmt_opt(m.mase24)
                ));
                out.push_str(&format!(
                    "{series},{method},mase168,{}\n",
                    fmt_opt(m.mase168)
                ));
                for (level, v) in &m.ql {
                    out.push_str(&format!("{series},{method},ql_{level},{v}\n"));
                }
                for (level, v) in &m.ws {
                    out.push_str(&format!("{series},{method},ws_{level},{v}\n"));
                }
            }
        }
        for (method, v) in &self.energy_score {
            out.push_str(&format!("all,{method},energy_score,{v}\n"));
        }
        if let Some(flat) = &self.energy_score_flat {
            for (method, v) in flat {
                out.push_str(&format!("all,{method},energy_score_flat,{v}\n"));
            }
        }
        for (method, v) in &self.coherency {
            out.push_str(&format!("all,{method},coherency_residual,{v}\n"));
        }
        out.push_str(&format!(
            "all,all,anova_overall_f,{}\n",
            self.anova_overall.f_statistic
        ));
        out.push_str(&format!(
            "all,all,anova_overall_p,{}\n",
            self.anova_overall.p_value
        ));
        for p in &self.anova_pairwise {
            out.push_str(&format!(
                "all,{}_vs_{},anova_f,{}\n",
                p.method_a, p.method_b, p.f_statistic
            ));
            out.push_str(&format!(
                "all,{}_vs_{},anova_p,{}\n",
                p.method_a, p.method_b, p.p_value
            ));
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        Ok(())
    }
}

/// Plot-ready per-step rows: timestamp, actual, scenario mean and envelope
/// quantiles per (method, series).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRow {
    pub method: String,
    pub series: String,
    pub timestamp: String,
    pub actual: f64,
    pub mean: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

pub fn steps_csv(rows: &[StepRow]) -> String {
    let mut out = String::from("method,series,timestamp,actual,mean,q10,q50,q90\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method, r.series, r.timestamp, r.actual, r.mean, r.q10, r.q50, r.q90
        ));
    }
    out
}
