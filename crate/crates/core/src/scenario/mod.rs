//! Scene data model: ground-truth agents sampled at a fixed 2 Hz, map
//! polylines and ego poses, plus validation and per-frame observations.

mod features;
mod generator;

pub use features::{
    feature_oracle, FeatureOracleParams, SemanticState, POSITION_SCALE, SEMANTIC_DIMS, SIZE_SCALE,
    STATE_DIMS, VELOCITY_SCALE,
};
pub use generator::{generate_synthetic, Archetype, ScenarioConfig};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameTransform, Point2};

/// Seconds between consecutive frames.
pub const FRAME_PERIOD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    Vehicle,
    Pedestrian,
}

impl AgentType {
    pub const ALL: [AgentType; 2] = [AgentType::Vehicle, AgentType::Pedestrian];

    pub fn name(self) -> &'static str {
        match self {
            AgentType::Vehicle => "vehicle",
            AgentType::Pedestrian => "pedestrian",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    #[default]
    None,
    TurnLeft,
    TurnRight,
    Stopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSize {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Point2,
    pub velocity: Point2,
    pub size: BoxSize,
    pub heading: f64,
    pub intent: Intent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAgent {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archetype: Option<Archetype>,
    pub presence: Vec<bool>,
    pub states: Vec<Option<AgentState>>,
}

impl GroundTruthAgent {
    pub fn state(&self, frame: usize) -> Option<&AgentState> {
        self.states.get(frame).and_then(Option::as_ref)
    }

    pub fn is_present(&self, frame: usize) -> bool {
        self.presence.get(frame).copied().unwrap_or(false)
    }

    /// Contiguous `[first, last]` frame spans of presence.
    pub fn presence_spans(&self) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, &p) in self.presence.iter().enumerate() {
            match (p, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    spans.push((s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push((s, self.presence.len() - 1));
        }
        spans
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u32,
    pub timestamp: f64,
    pub ego_pose: FrameTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSegment {
    pub start: Point2,
    pub end: Point2,
    pub attribute: u32,
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPolyline {
    pub id: u32,
    pub segments: Vec<MapSegment>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub frames: Vec<Frame>,
    pub agents: Vec<GroundTruthAgent>,
    pub map: Vec<MapPolyline>,
    #[serde(default)]
    pub metadata: SceneMetadata,
}

fn finite_point(p: Point2, path: &str) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(path, "non-finite coordinate"))
    }
}

impl Scene {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Checks every structural invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::validation("scene.frames", "scene has no frames"));
        }
        for (i, f) in self.frames.iter().enumerate() {
            let path = format!("scene.frames[{i}]");
            if f.index as usize != i {
                return Err(Error::validation(format!("{path}.index"), format!("expected {i}, found {}", f.index)));
            }
            if !f.timestamp.is_finite() {
                return Err(Error::validation(format!("{path}.timestamp"), "non-finite timestamp"));
            }
            if i > 0 {
                let dt = f.timestamp - self.frames[i - 1].timestamp;
                if (dt - FRAME_PERIOD).abs() > 1e-9 {
                    return Err(Error::validation(
                        format!("{path}.timestamp"),
                        format!("frame period must be {FRAME_PERIOD} s, found {dt}"),
                    ));
                }
            }
            finite_point(f.ego_pose.origin, &format!("{path}.ego_pose.origin"))?;
            if !f.ego_pose.heading.is_finite() {
                return Err(Error::validation(format!("{path}.ego_pose.heading"), "non-finite heading"));
            }
        }
        let n = self.frames.len();
        let mut ids: Vec<u32> = Vec::with_capacity(self.agents.len());
        for (a, agent) in self.agents.iter().enumerate() {
            let path = format!("scene.agents[{a}]");
            if ids.contains(&agent.track_id.0) {
                return Err(Error::validation(format!("{path}.track_id"), "duplicate track id"));
            }
            ids.push(agent.track_id.0);
            if agent.presence.len() != n {
                return Err(Error::validation(
                    format!("{path}.presence"),
                    format!("length {} does not match frame count {n}", agent.presence.len()),
                ));
            }
            if agent.states.len() != n {
                return Err(Error::validation(
                    format!("{path}.states"),
                    format!("length {} does not match frame count {n}", agent.states.len()),
                ));
            }
            for (f, (p, s)) in agent.presence.iter().zip(&agent.states).enumerate() {
                let spath = format!("{path}.states[{f}]");
                match (p, s) {
                    (true, None) => return Err(Error::validation(spath, "agent present but state missing")),
                    (false, Some(_)) => return Err(Error::validation(spath, "state given for absent agent")),
                    (true, Some(st)) => {
                        finite_point(st.position, &format!("{spath}.position"))?;
                        finite_point(st.velocity, &format!("{spath}.velocity"))?;
                        let sz = st.size;
                        if !(sz.length > 0.0 && sz.width > 0.0 && sz.height > 0.0) {
                            return Err(Error::validation(format!("{spath}.size"), "box dimensions must be positive"));
                        }
                        if !st.heading.is_finite() {
                            return Err(Error::validation(format!("{spath}.heading"), "non-finite heading"));
                        }
                    }
                    (false, None) => {}
                }
            }
        }
        for (m, poly) in self.map.iter().enumerate() {
            for (k, seg) in poly.segments.iter().enumerate() {
                let path = format!("scene.map[{m}].segments[{k}]");
                finite_point(seg.start, &format!("{path}.start"))?;
                finite_point(seg.end, &format!("{path}.end"))?;
                if seg.ordinal as usize != k {
                    return Err(Error::validation(format!("{path}.ordinal"), format!("expected {k}, found {}", seg.ordinal)));
                }
                if k > 0 && seg.start.distance(poly.segments[k - 1].end) > 1e-9 {
                    return Err(Error::validation(format!("{path}.start"), "segment does not continue the previous one"));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth view of one frame, as consumed by the pipelines.
    pub fn observation(&self, frame: usize) -> FrameObservation {
        let f = &self.frames[frame];
        let agents = self
            .agents
            .iter()
            .filter_map(|a| {
                a.state(frame).map(|s| ObservedAgent {
                    track_id: a.track_id,
                    agent_type: a.agent_type,
                    state: *s,
                })
            })
            .collect();
        FrameObservation {
            index: f.index,
            timestamp: f.timestamp,
            ego_pose: f.ego_pose,
            agents,
            features: Vec::new(),
        }
    }

    pub fn agent(&self, id: TrackId) -> Option<&GroundTruthAgent> {
        self.agents.iter().find(|a| a.track_id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedAgent {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    pub state: AgentState,
}

/// Everything a pipeline may see about one frame. `features` is filled by
/// the feature oracle (one vector per visible detection) and is empty for
/// pipelines that do not use it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub index: u32,
    pub timestamp: f64,
    pub ego_pose: FrameTransform,
    pub agents: Vec<ObservedAgent>,
    pub features: Vec<Vec<f64>>,
}
