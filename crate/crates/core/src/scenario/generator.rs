//! Scripted synthetic scenes: straight and turning vehicles, stopping and
//! crossing pedestrians, a static lane grid and a straight-driving ego.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    AgentState, AgentType, BoxSize, Frame, GroundTruthAgent, Intent, MapPolyline, MapSegment, Scene,
    SceneMetadata, TrackId, FRAME_PERIOD,
};
use crate::error::{Error, Result};
use crate::geometry::{velocity_heading, FrameTransform, MotionPlan, MotionSegment, Point2};
use crate::math::{self, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Straight,
    TurnLeft,
    TurnRight,
    StoppingPedestrian,
    CrossingPedestrian,
}

impl Archetype {
    pub fn agent_type(self) -> AgentType {
        match self {
            Archetype::Straight | Archetype::TurnLeft | Archetype::TurnRight => AgentType::Vehicle,
            _ => AgentType::Pedestrian,
        }
    }
}

/// Generator settings. Counts are signed so malformed configs can be
/// reported instead of silently wrapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub frames: i32,
    pub straight_vehicles: i32,
    pub left_turn_vehicles: i32,
    pub right_turn_vehicles: i32,
    pub stopping_pedestrians: i32,
    pub crossing_pedestrians: i32,
    /// Agents start between 10 m and this distance from the ego.
    pub spawn_radius: f64,
    pub vehicle_speed: (f64, f64),
    pub pedestrian_speed: (f64, f64),
    /// Magnitude of the turning yaw rate, rad/s.
    pub turn_rate: f64,
    pub turn_frames: i32,
    /// Frames before a turn or stop during which the intent flag is raised.
    pub intent_lead_frames: i32,
    /// Mid-scene absence of crossing pedestrians (0 disables).
    pub occlusion_gap_frames: i32,
    pub ego_speed: f64,
    /// Std-dev of Gaussian jitter on recorded positions (m).
    pub annotation_noise: f64,
    pub with_map: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            frames: 20,
            straight_vehicles: 2,
            left_turn_vehicles: 1,
            right_turn_vehicles: 1,
            stopping_pedestrians: 1,
            crossing_pedestrians: 1,
            spawn_radius: 35.0,
            vehicle_speed: (6.0, 9.0),
            pedestrian_speed: (1.0, 1.6),
            // 90 degrees over 6 frames (3 s)
            turn_rate: PI / 6.0,
            turn_frames: 6,
            intent_lead_frames: 3,
            occlusion_gap_frames: 0,
            ego_speed: 0.0,
            annotation_noise: 0.0,
            with_map: true,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames <= 0 {
            return Err(Error::config(format!("frames must be positive, got {}", self.frames)));
        }
        for (name, v) in [
            ("straight_vehicles", self.straight_vehicles),
            ("left_turn_vehicles", self.left_turn_vehicles),
            ("right_turn_vehicles", self.right_turn_vehicles),
            ("stopping_pedestrians", self.stopping_pedestrians),
            ("crossing_pedestrians", self.crossing_pedestrians),
            ("occlusion_gap_frames", self.occlusion_gap_frames),
        ] {
            if v < 0 {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.turn_frames < 1 || self.intent_lead_frames < 1 {
            return Err(Error::config("turn_frames and intent_lead_frames must be >= 1"));
        }
        let ranges = [("vehicle_speed", self.vehicle_speed), ("pedestrian_speed", self.pedestrian_speed)];
        for (name, (lo, hi)) in ranges {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(format!("{name} range must satisfy 0 < min <= max")));
            }
        }
        if !(self.spawn_radius > 10.0 && self.spawn_radius.is_finite()) {
            return Err(Error::config("spawn_radius must exceed 10 m"));
        }
        if !(self.turn_rate > 0.0 && self.turn_rate.is_finite()) {
            return Err(Error::config("turn_rate must be positive"));
        }
        if !(self.annotation_noise >= 0.0 && self.ego_speed.is_finite()) {
            return Err(Error::config("annotation_noise must be >= 0 and ego_speed finite"));
        }
        Ok(())
    }

    fn archetypes(&self) -> Vec<Archetype> {
        let mut out = Vec::new();
        for (arch, n) in [
            (Archetype::Straight, self.straight_vehicles),
            (Archetype::TurnLeft, self.left_turn_vehicles),
            (Archetype::TurnRight, self.right_turn_vehicles),
            (Archetype::StoppingPedestrian, self.stopping_pedestrians),
            (Archetype::CrossingPedestrian, self.crossing_pedestrians),
        ] {
            out.extend(core::iter::repeat_n(arch, n as usize));
        }
        out
    }
}

const MIN_EGO_CLEARANCE: f64 = 6.0;
const MIN_AGENT_CLEARANCE: f64 = 3.0;
const PLACEMENT_ATTEMPTS: usize = 200;

struct Script {
    plan: MotionPlan,
    intent_frames: core::ops::Range<usize>,
    intent: Intent,
    size: BoxSize,
    presence: Vec<bool>,
}

fn ego_position(cfg: &ScenarioConfig, frame: usize) -> Point2 {
    Point2::new(0.0, cfg.ego_speed * frame as f64 * FRAME_PERIOD)
}

/// Frame at which a scripted manoeuvre begins.
fn manoeuvre_frame(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> usize {
    let lead = cfg.intent_lead_frames as usize;
    let frames = cfg.frames as usize;
    let lo = lead + 1;
    let hi = (frames.saturating_sub(cfg.turn_frames as usize + 1)).min(frames / 2).max(lo);
    rng.random_range(lo..=hi)
}

fn script(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig, arch: Archetype) -> Script {
    let frames = cfg.frames as usize;
    let dt = FRAME_PERIOD;
    let r = rng.random_range(10.0..cfg.spawn_radius);
    let a = rng.random_range(-PI..PI);
    let start = Point2::new(r * math::cos(a), r * math::sin(a));
    let heading = rng.random_range(-PI..PI);
    let (speed, size) = match arch.agent_type() {
        AgentType::Vehicle => (
            rng.random_range(cfg.vehicle_speed.0..=cfg.vehicle_speed.1),
            BoxSize {
                length: rng.random_range(4.0..5.0),
                width: rng.random_range(1.8..2.1),
                height: rng.random_range(1.4..1.9),
            },
        ),
        AgentType::Pedestrian => (
            rng.random_range(cfg.pedestrian_speed.0..=cfg.pedestrian_speed.1),
            BoxSize {
                length: rng.random_range(0.5..0.8),
                width: rng.random_range(0.5..0.8),
                height: rng.random_range(1.5..1.9),
            },
        ),
    };
    let straight = |s: f64| MotionSegment { duration: f64::INFINITY, speed: s, yaw_rate: 0.0 };
    let lead = cfg.intent_lead_frames as usize;
    let mut presence = vec![true; frames];
    let (segments, intent_frames, intent) = match arch {
        Archetype::Straight => (vec![straight(speed)], 0..0, Intent::None),
        Archetype::TurnLeft | Archetype::TurnRight => {
            let ts = manoeuvre_frame(rng, cfg);
            let sign = if arch == Archetype::TurnLeft { 1.0 } else { -1.0 };
            let intent = if sign > 0.0 { Intent::TurnLeft } else { Intent::TurnRight };
            (
                vec![
                    MotionSegment { duration: ts as f64 * dt, speed, yaw_rate: 0.0 },
                    MotionSegment {
                        duration: cfg.turn_frames as f64 * dt,
                        speed,
                        yaw_rate: sign * cfg.turn_rate,
                    },
                    straight(speed),
                ],
                ts - lead..ts,
                intent,
            )
        }
        Archetype::StoppingPedestrian => {
            let ss = manoeuvre_frame(rng, cfg);
            (
                vec![MotionSegment { duration: ss as f64 * dt, speed, yaw_rate: 0.0 }, straight(0.0)],
                ss - lead..ss,
                Intent::Stopping,
            )
        }
        Archetype::CrossingPedestrian => {
            let gap = cfg.occlusion_gap_frames as usize;
            if gap > 0 && gap + 2 <= frames {
                let g0 = (frames - gap) / 2;
                presence[g0..g0 + gap].iter_mut().for_each(|p| *p = false);
            }
            (vec![straight(speed)], 0..0, Intent::None)
        }
    };
    Script {
        plan: MotionPlan { start, heading, segments },
        intent_frames,
        intent,
        size,
        presence,
    }
}

fn clear_of(script: &Script, cfg: &ScenarioConfig, placed: &[Vec<Point2>]) -> bool {
    let frames = cfg.frames as usize;
    (0..frames).all(|f| {
        let p = script.plan.state_at(f as f64 * FRAME_PERIOD).position;
        p.distance(ego_position(cfg, f)) >= MIN_EGO_CLEARANCE
            && placed.iter().all(|other| p.distance(other[f]) >= MIN_AGENT_CLEARANCE)
    })
}

fn lane_grid(cfg: &ScenarioConfig) -> Vec<MapPolyline> {
    let half = cfg.spawn_radius + 30.0;
    let seg_len = 5.0;
    let n = (2.0 * half / seg_len) as usize;
    let mut out = Vec::new();
    let offsets = [-3.5, 3.5];
    let mut id = 0;
    for (attribute, vertical) in [(1u32, true), (2u32, false)] {
        for &o in &offsets {
            let point = |s: f64| if vertical { Point2::new(o, s) } else { Point2::new(s, o) };
            let segments = (0..n)
                .map(|k| MapSegment {
                    start: point(-half + k as f64 * seg_len),
                    end: point(-half + (k + 1) as f64 * seg_len),
                    attribute,
                    ordinal: k as u32,
                })
                .collect();
            out.push(MapPolyline { id, segments });
            id += 1;
        }
    }
    out
}

/// Deterministic scene for `(config, seed)`.
pub fn generate_synthetic(config: &ScenarioConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let frames = config.frames as usize;
    let dt = FRAME_PERIOD;
    let mut placed_paths: Vec<Vec<Point2>> = Vec::new();
    let mut agents = Vec::new();
    for (i, arch) in config.archetypes().into_iter().enumerate() {
        let mut rng = math::rng_from(math::derive_seed(seed, &[0xA6E7, i as u64]));
        let mut chosen = script(&mut rng, config, arch);
        for _ in 1..PLACEMENT_ATTEMPTS {
            if clear_of(&chosen, config, &placed_paths) {
                break;
            }
            chosen = script(&mut rng, config, arch);
        }
        let mut noise_rng = math::rng_from(math::derive_seed(seed, &[0x4015E, i as u64]));
        let mut path = Vec::with_capacity(frames);
        let mut states = Vec::with_capacity(frames);
        let mut last_heading = chosen.plan.heading;
        for f in 0..frames {
            let ks = chosen.plan.state_at(f as f64 * dt);
            path.push(ks.position);
            let velocity = ks.velocity();
            last_heading = velocity_heading(velocity, last_heading);
            let mut position = ks.position;
            if config.annotation_noise > 0.0 {
                let (nx, ny): (f64, f64) = (noise_rng.sample(StandardNormal), noise_rng.sample(StandardNormal));
                position = position + Point2::new(nx, ny) * config.annotation_noise;
            }
            let intent = if chosen.intent_frames.contains(&f) { chosen.intent } else { Intent::None };
            states.push(chosen.presence[f].then_some(AgentState {
                position,
                velocity,
                size: chosen.size,
                heading: math::wrap_angle(last_heading),
                intent,
            }));
        }
        placed_paths.push(path);
        agents.push(GroundTruthAgent {
            track_id: TrackId(i as u32 + 1),
            agent_type: arch.agent_type(),
            archetype: Some(arch),
            presence: chosen.presence,
            states,
        });
    }
    let frames_vec = (0..frames)
        .map(|f| Frame {
            index: f as u32,
            timestamp: f as f64 * dt,
            ego_pose: FrameTransform::new(ego_position(config, f), PI / 2.0),
        })
        .collect();
    Ok(Scene {
        id: format!("synthetic-{seed}"),
        frames: frames_vec,
        agents,
        map: if config.with_map { lane_grid(config) } else { Vec::new() },
        metadata: SceneMetadata {
            generator: Some(config.clone()),
            seed: Some(seed),
            source: None,
        },
    })
}
