use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, PipelineKind};
use super::pipeline::{check_order, AgentTrace, DecoderIntermediates, Pipeline, StepOutput};
use super::query::QueryPipeline;
use super::traditional::TraditionalPipeline;
use crate::decoders::{goal_loss, heatmap_loss, variety_loss, DecoderConfig, TrajectoryModeSet};
use crate::error::{Error, Result};
use crate::geometry::{FrameTag, Trajectory};
use crate::metrics::{
    aggregate, aggregate_all, evaluate_step, finalize, match_step, AgentError, FinalMetrics, GroundTruthFuture,
    MetricReport, PredictedAgent,
};
use crate::scenario::{FrameObservation, Scene, TrackId};

/// `L = L_cls + L_coord + L_traj`.
pub fn total_loss(l_cls: f64, l_coord: f64, l_traj: f64) -> f64 {
    l_cls + l_coord + l_traj
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameLoss {
    pub frame: u32,
    pub l_cls: f64,
    pub l_coord: f64,
    pub l_traj: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamDiagnostics {
    pub frame_losses: Vec<FrameLoss>,
    pub mean_total_loss: Option<f64>,
    /// Emitted agents whose readout could not be inverted.
    pub fallbacks: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamResult {
    pub report: MetricReport,
    pub step_reports: Vec<MetricReport>,
    /// `(frame, error)` for every scored agent.
    pub agent_errors: Vec<(u32, AgentError)>,
    pub diagnostics: StreamDiagnostics,
}

/// Steps with a full future window: `frame_count - t_future`, or zero.
pub fn evaluated_steps(frame_count: usize, t_future: usize) -> usize {
    frame_count.saturating_sub(t_future)
}

fn future_of(scene: &Scene, id: TrackId, t: usize, t_future: usize) -> Option<Trajectory> {
    let agent = scene.agent(id)?;
    let pts: Option<Vec<_>> = (t + 1..=t + t_future).map(|f| agent.state(f).map(|s| s.position)).collect();
    pts.map(|p| Trajectory::new(p, FrameTag::Global))
}

/// Ground truth present at step `t` with its future, when complete.
pub fn ground_truth_futures(scene: &Scene, t: usize, t_future: usize) -> Vec<GroundTruthFuture> {
    scene
        .agents
        .iter()
        .filter_map(|a| {
            a.state(t).map(|s| GroundTruthFuture {
                track_id: a.track_id,
                agent_type: a.agent_type,
                position: s.position,
                future: future_of(scene, a.track_id, t, t_future),
            })
        })
        .collect()
}

fn trace_loss(trace: &AgentTrace, scene: &Scene, t: usize, dcfg: &DecoderConfig) -> Result<Option<f64>> {
    let Some(id) = trace.gt_track else { return Ok(None) };
    let Some(future) = future_of(scene, id, t, dcfg.t_future) else { return Ok(None) };
    let pts = future
        .waypoints
        .iter()
        .map(|&p| trace.view_frame.to_local(trace.ego_pose.to_local(p)))
        .collect();
    let gt = Trajectory::new(pts, trace.modes_view.modes[0].frame);
    let l = match &trace.intermediates {
        DecoderIntermediates::None => variety_loss(&trace.modes_view, &gt, dcfg.delta)?,
        DecoderIntermediates::Goal(i) => goal_loss(i, &gt, dcfg)?,
        DecoderIntermediates::Heatmap { heatmap, completion } => heatmap_loss(heatmap, completion, &gt, dcfg)?,
    };
    Ok(Some(l))
}

/// Runs `pipeline` over the evaluable prefix of `scene` and scores every
/// step. Pipeline state persists across steps.
pub fn evaluate_with<P: Pipeline>(pipeline: &P, scene: &Scene, config: &PipelineConfig) -> Result<StreamResult> {
    let mcfg = config.metric_config();
    let dcfg = config.decoder_config();
    let steps = evaluated_steps(scene.frame_count(), config.t_future);
    let mut diagnostics = StreamDiagnostics::default();
    if steps == 0 {
        diagnostics.warnings.push(format!(
            "scene {} has {} frames; at least {} are needed for t_future = {}",
            scene.id,
            scene.frame_count(),
            config.t_future + 1,
            config.t_future
        ));
        return Ok(StreamResult { report: MetricReport::empty(mcfg), step_reports: Vec::new(), agent_errors: Vec::new(), diagnostics });
    }
    let mut state = pipeline.init(scene)?;
    let mut report = MetricReport::empty(mcfg);
    let mut step_reports = Vec::with_capacity(steps);
    let mut agent_errors = Vec::new();
    for t in 0..steps {
        let obs = scene.observation(t);
        let out = pipeline.step(&mut state, &obs)?;
        let gts = ground_truth_futures(scene, t, config.t_future);
        let r = evaluate_step(&out.agents, &gts, &mcfg)?;
        agent_errors.extend(match_step(&out.agents, &gts, &mcfg)?.errors.into_iter().map(|e| (obs.index, e)));
        report = aggregate(&report, &r)?;
        step_reports.push(r);
        diagnostics.fallbacks += out.traces.iter().filter(|tr| tr.fallback).count() as u64;
        if let Some((l_cls, l_coord)) = out.supervision_losses {
            let mut l_traj = 0.0;
            for tr in &out.traces {
                l_traj += trace_loss(tr, scene, t, &dcfg)?.unwrap_or(0.0);
            }
            diagnostics.frame_losses.push(FrameLoss {
                frame: obs.index,
                l_cls,
                l_coord,
                l_traj,
                total: total_loss(l_cls, l_coord, l_traj),
            });
        }
    }
    if !diagnostics.frame_losses.is_empty() {
        let sum: f64 = diagnostics.frame_losses.iter().map(|f| f.total).sum();
        diagnostics.mean_total_loss = Some(sum / diagnostics.frame_losses.len() as f64);
    }
    Ok(StreamResult { report, step_reports, agent_errors, diagnostics })
}

/// Builds the configured pipeline and evaluates one scene.
pub fn evaluate_stream(scene: &Scene, config: &PipelineConfig) -> Result<StreamResult> {
    match config.pipeline {
        PipelineKind::Query => evaluate_with(&QueryPipeline::new(config)?, scene, config),
        PipelineKind::Traditional => evaluate_with(&TraditionalPipeline::new(config)?, scene, config),
    }
}

/// Emits every present agent with its exact future; a reference for the
/// perfect-score case.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPipeline {
    pub scene: Scene,
    pub k: usize,
    pub t_future: usize,
}

impl Pipeline for GroundTruthPipeline {
    type State = Option<u32>;

    fn init(&self, _scene: &Scene) -> Result<Option<u32>> {
        Ok(None)
    }

    fn step(&self, state: &mut Option<u32>, frame: &FrameObservation) -> Result<StepOutput> {
        check_order(*state, frame)?;
        *state = Some(frame.index);
        let t = frame.index as usize;
        let mut out = StepOutput::default();
        for a in &frame.agents {
            let future = future_of(&self.scene, a.track_id, t, self.t_future).unwrap_or_else(|| {
                Trajectory::new(alloc::vec![a.state.position; self.t_future], FrameTag::Global)
            });
            out.agents.push(PredictedAgent {
                track_id: a.track_id,
                agent_type: a.agent_type,
                position: a.state.position,
                modes: TrajectoryModeSet::new(alloc::vec![future; self.k], alloc::vec![1.0 / self.k as f64; self.k])?,
            });
        }
        Ok(out)
    }
}

/// Aggregated report of one configuration over a scene set.
pub fn run_config(scenes: &[Scene], config: &PipelineConfig) -> Result<MetricReport> {
    let reports = scenes
        .iter()
        .map(|s| evaluate_stream(s, config).map(|r| r.report))
        .collect::<Result<Vec<_>>>()?;
    let mut total = aggregate_all(&reports)?;
    total.config = Some(config.metric_config());
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub index: usize,
    pub label: String,
    pub metrics: Option<FinalMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub fn comparison_row(index: usize, config: &PipelineConfig, outcome: Result<MetricReport>) -> ComparisonRow {
    match outcome {
        Ok(r) => ComparisonRow { index, label: config.label(), metrics: Some(finalize(&r)), error: None },
        Err(e) => ComparisonRow { index, label: config.label(), metrics: None, error: Some(format!("{e}")) },
    }
}

/// One row per configuration, in input order. A configuration that fails
/// is reported in its row without affecting the others.
pub fn compare(scenes: &[Scene], configs: &[PipelineConfig]) -> Result<ComparisonTable> {
    if scenes.is_empty() || configs.is_empty() {
        return Err(Error::invalid("compare needs at least one scene and one configuration"));
    }
    let rows = configs
        .iter()
        .enumerate()
        .map(|(i, c)| comparison_row(i, c, run_config(scenes, c)))
        .collect();
    Ok(ComparisonTable { rows })
}
