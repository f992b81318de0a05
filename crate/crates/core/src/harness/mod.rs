//! Streaming evaluation: the query pipeline, the tracking-by-detection
//! baseline, per-step metric scoring, and pipeline comparison.

mod config;
mod detection;
mod evaluate;
mod pipeline;
mod query;
mod traditional;

pub use config::{DecoderKind, PipelineConfig, PipelineKind};
pub use detection::{detect, ego_center, visible_cameras, Detection};
pub use evaluate::{
    compare, comparison_row, evaluate_stream, evaluate_with, evaluated_steps, ground_truth_futures, run_config,
    total_loss, ComparisonRow, ComparisonTable, FrameLoss, GroundTruthPipeline, StreamDiagnostics, StreamResult,
};
pub use pipeline::{AgentTrace, DecoderIntermediates, Pipeline, StepOutput};
pub use query::{QueryPipeline, QueryPipelineState, TrackMotion};
pub use traditional::{
    kf_predict, kf_update, predict_modes, two_point_init, KalmanTrack, TraditionalPipeline, TraditionalState,
    BIRTH_VELOCITY_VARIANCE, HEADING_PERTURBATIONS,
};
