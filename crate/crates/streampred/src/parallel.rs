//! Scene-parallel evaluation. Results are reduced in input order, so the
//! output is bit-identical to a sequential run.

use rayon::prelude::*;
use streampred_core::harness::{comparison_row, evaluate_stream, ComparisonTable, PipelineConfig, StreamResult};
use streampred_core::metrics::{aggregate_all, MetricReport};
use streampred_core::scenario::Scene;

use crate::error::{AppError, Result};
use crate::report::SceneDiagnostics;

pub fn evaluate_scenes(scenes: &[Scene], config: &PipelineConfig) -> Result<Vec<StreamResult>> {
    config.validate()?;
    let results: Vec<_> = scenes.par_iter().map(|s| evaluate_stream(s, config)).collect();
    results.into_iter().map(|r| r.map_err(AppError::from)).collect()
}

pub fn reduce(results: &[StreamResult], config: &PipelineConfig) -> Result<MetricReport> {
    let mut total = aggregate_all(results.iter().map(|r| &r.report))?;
    total.config = Some(config.metric_config());
    Ok(total)
}

pub fn diagnostics(scenes: &[Scene], results: &[StreamResult]) -> Vec<SceneDiagnostics> {
    scenes
        .iter()
        .zip(results)
        .map(|(s, r)| SceneDiagnostics {
            scene: s.id.clone(),
            steps: r.report.steps,
            mean_total_loss: r.diagnostics.mean_total_loss,
            fallbacks: r.diagnostics.fallbacks,
            warnings: r.diagnostics.warnings.clone(),
        })
        .collect()
}

/// Parallel counterpart of the core `compare`: one row per configuration,
/// failures reported in their row.
pub fn compare(scenes: &[Scene], configs: &[PipelineConfig]) -> Result<ComparisonTable> {
    if scenes.is_empty() || configs.is_empty() {
        return Err(AppError::Usage("compare needs at least one scene and one configuration".into()));
    }
    let rows = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let outcome = evaluate_scenes(scenes, c).and_then(|r| reduce(&r, c)).map_err(|e| match e {
                AppError::Core(c) => c,
                other => streampred_core::error::Error::InvalidInput(other.to_string()),
            });
            comparison_row(i, c, outcome)
        })
        .collect();
    Ok(ComparisonTable { rows })
}
