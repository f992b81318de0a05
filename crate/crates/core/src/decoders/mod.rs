//! Trajectory decoders (regression, goal-based, heatmap-based, and the
//! feature-inverting oracle) with their loss functions.

mod goal;
mod heatmap;
mod losses;
mod mlp;
mod modes;
mod oracle;
mod regression;

pub use goal::{complete_goal, goal_decode, goal_loss, score_goal, Completion, GoalDecoderParams, GoalIntermediates};
pub use heatmap::{heatmap_decode, heatmap_grid, heatmap_loss, HeatmapOutput};
pub use losses::{
    bce, smooth_l1, smooth_l1_scalar, trajectory_loss, variety_loss, variety_select, LOG_FLOOR, SMOOTH_L1_DELTA,
};
pub use mlp::Mlp;
pub use modes::{nms_select, GoalCandidate, GoalHeatmap, TrajectoryModeSet};
pub use oracle::{
    decode_readout, oracle_decoder, query_head, view_frame, rollout_modes, ManoeuvreModel, OracleOutput, OracleParams, QueryReadout, View,
};
pub use regression::{regression_decode, RegressionDecoder};

use serde::{Deserialize, Serialize};

/// Constants shared by the decoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub k: usize,
    pub t_future: usize,
    pub dt: f64,
    pub delta: f64,
    pub tau_goal: f64,
    pub nms_radius: f64,
    pub n_goal: usize,
    pub r_min: f64,
    pub heatmap_side: f64,
    pub hidden: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            k: 6,
            t_future: 12,
            dt: crate::scenario::FRAME_PERIOD,
            delta: SMOOTH_L1_DELTA,
            tau_goal: 2.0,
            nms_radius: 2.0,
            n_goal: 128,
            r_min: 5.0,
            heatmap_side: 60.0,
            hidden: 128,
        }
    }
}

impl DecoderConfig {
    pub fn horizon(&self) -> f64 {
        self.t_future as f64 * self.dt
    }
}
