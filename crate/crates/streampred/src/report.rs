//! Run and comparison reports as JSON and CSV. Row order is fixed:
//! scope (overall, vehicle, pedestrian), then metric.

use serde::{Deserialize, Serialize};
use streampred_core::harness::{ComparisonTable, PipelineConfig};
use streampred_core::metrics::{FinalMetrics, MetricReport, TypeMetrics};

use crate::error::{AppError, Result};

pub const REPORT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDiagnostics {
    pub scene: String,
    pub steps: u64,
    pub mean_total_loss: Option<f64>,
    pub fallbacks: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u64,
    pub label: String,
    pub config: PipelineConfig,
    pub metrics: FinalMetrics,
    pub counters: MetricReport,
    pub scenes: Vec<SceneDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u64,
    pub scenes: Vec<String>,
    pub table: ComparisonTable,
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `(scope, metric, value)` rows.
pub fn metric_rows(m: &FinalMetrics) -> Vec<(&'static str, &'static str, String)> {
    let mut rows = vec![
        ("overall", "min_ade", fmt(m.min_ade)),
        ("overall", "min_fde", fmt(m.min_fde)),
        ("overall", "miss_rate", fmt(m.miss_rate)),
        ("overall", "epa", fmt(m.epa)),
        ("overall", "steps", m.steps.to_string()),
    ];
    let per_type = |scope: &'static str, t: &TypeMetrics| {
        vec![
            (scope, "min_ade", fmt(t.min_ade)),
            (scope, "min_fde", fmt(t.min_fde)),
            (scope, "miss_rate", fmt(t.miss_rate)),
            (scope, "epa", fmt(t.epa)),
            (scope, "matched", t.matched.to_string()),
            (scope, "hits", t.hits.to_string()),
            (scope, "false_positives", t.false_positives.to_string()),
            (scope, "n_gt", t.n_gt.to_string()),
        ]
    };
    rows.extend(per_type("vehicle", &m.vehicle));
    rows.extend(per_type("pedestrian", &m.pedestrian));
    rows
}

fn csv_err(e: impl std::fmt::Display) -> AppError {
    AppError::Usage(format!("CSV encoding failed: {e}"))
}

pub fn metrics_csv(m: &FinalMetrics) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scope", "metric", "value"]).map_err(csv_err)?;
    for (scope, metric, value) in metric_rows(m) {
        w.write_record([scope, metric, value.as_str()]).map_err(csv_err)?;
    }
    w.into_inner().map_err(csv_err)
}

pub fn comparison_csv(t: &ComparisonTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "label", "scope", "metric", "value", "error"]).map_err(csv_err)?;
    for row in &t.rows {
        let index = row.index.to_string();
        match (&row.metrics, &row.error) {
            (Some(m), _) => {
                for (scope, metric, value) in metric_rows(m) {
                    w.write_record([index.as_str(), &row.label, scope, metric, &value, ""]).map_err(csv_err)?;
                }
            }
            (None, err) => {
                let e = err.clone().unwrap_or_default();
                w.write_record([index.as_str(), &row.label, "", "", "", &e]).map_err(csv_err)?;
            }
        }
    }
    w.into_inner().map_err(csv_err)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| AppError::Usage(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}
