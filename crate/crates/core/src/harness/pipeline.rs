use alloc::vec::Vec;

use crate::decoders::{Completion, GoalHeatmap, GoalIntermediates, TrajectoryModeSet};
use crate::error::Result;
use crate::geometry::FrameTransform;
use crate::metrics::PredictedAgent;
use crate::scenario::{FrameObservation, Scene, TrackId};

/// A streaming pipeline: state after frame `t` depends only on the state
/// after `t - 1` and frame `t`. States are `Clone`, which doubles as
/// checkpointing.
pub trait Pipeline {
    type State: Clone;

    fn init(&self, scene: &Scene) -> Result<Self::State>;

    fn step(&self, state: &mut Self::State, frame: &FrameObservation) -> Result<StepOutput>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderIntermediates {
    None,
    Goal(GoalIntermediates),
    Heatmap { heatmap: GoalHeatmap, completion: Completion },
}

/// What a decoder produced for one emitted agent, kept for loss reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    /// Ground-truth track the query is supervised toward.
    pub gt_track: Option<TrackId>,
    /// Maps ego coordinates into the decoder's view frame.
    pub view_frame: FrameTransform,
    /// Maps global coordinates into the ego frame.
    pub ego_pose: FrameTransform,
    pub modes_view: TrajectoryModeSet,
    pub intermediates: DecoderIntermediates,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutput {
    pub agents: Vec<PredictedAgent>,
    /// Parallel to `agents` when the pipeline records traces.
    pub traces: Vec<AgentTrace>,
    /// `(L_cls, L_coord)` for pipelines trained with query supervision.
    pub supervision_losses: Option<(f64, f64)>,
}

pub(crate) fn check_order(last: Option<u32>, frame: &FrameObservation) -> Result<()> {
    match last {
        Some(l) if frame.index <= l => Err(crate::error::Error::Sequencing { last: l, got: frame.index }),
        _ => Ok(()),
    }
}
