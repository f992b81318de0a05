//! The detection stream both pipelines consume: ground truth that is visible
//! to the camera rig, with seeded position noise and dropouts.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::PipelineConfig;
use crate::error::Result;
use crate::geometry::{project_to_camera, CameraModel, Point2, Point3};
use crate::math;
use crate::scenario::{AgentState, AgentType, FrameObservation, TrackId};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    /// Global frame, noise applied.
    pub position: Point2,
    /// Ground-truth state with `position` replaced by the noisy one.
    pub state: AgentState,
    /// Indices of the cameras that see the box centre.
    pub cameras: Vec<usize>,
}

/// Box centre in the ego frame.
pub fn ego_center(obs: &FrameObservation, state: &AgentState) -> Point3 {
    let p = obs.ego_pose.to_local(state.position);
    Point3::new(p.x, p.y, state.size.height / 2.0)
}

pub fn visible_cameras(p_ego: Point3, cameras: &[CameraModel]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, cam) in cameras.iter().enumerate() {
        if project_to_camera(p_ego, cam)?.is_some() {
            out.push(i);
        }
    }
    Ok(out)
}

pub fn detect(obs: &FrameObservation, cameras: &[CameraModel], cfg: &PipelineConfig) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for a in &obs.agents {
        let mut rng = math::rng_from(math::derive_seed(cfg.seed, &[0xDE7EC7, obs.index as u64, a.track_id.0 as u64]));
        let drop_draw: f64 = rng.random();
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        if drop_draw < cfg.dropout_rate {
            continue;
        }
        let cams = visible_cameras(ego_center(obs, &a.state), cameras)?;
        if cams.is_empty() {
            continue;
        }
        let position = a.state.position + Point2::new(nx, ny) * cfg.detection_noise;
        out.push(Detection {
            track_id: a.track_id,
            agent_type: a.agent_type,
            position,
            state: AgentState { position, ..a.state },
            cameras: cams,
        });
    }
    Ok(out)
}
