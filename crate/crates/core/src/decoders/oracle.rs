//! Reference decoder that reads the agent state back out of the attention
//! readout by least squares and rolls out constant-turn-rate manoeuvres
//! consistent with the decoded intent.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::modes::TrajectoryModeSet;
use super::DecoderConfig;
use crate::assignment::{BoxParams, ClassProbs, DetectionOutput};
use crate::error::{Error, Result};
use crate::geometry::{velocity_heading, FrameTag, FrameTransform, KinematicState, MotionPlan, MotionSegment, Point3,
    Trajectory};
use crate::math;
use crate::query_bank::AttentionParams;
use crate::scenario::{FeatureOracleParams, Intent, SemanticState, STATE_DIMS};

/// Manoeuvre timing the oracle assumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManoeuvreModel {
    /// rad/s.
    pub turn_rate: f64,
    pub turn_frames: usize,
    /// Frames between the first intent cue and the manoeuvre.
    pub lead_frames: usize,
}

impl Default for ManoeuvreModel {
    fn default() -> Self {
        Self {
            turn_rate: core::f64::consts::PI / 6.0,
            turn_frames: 6,
            lead_frames: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Allocentric,
    Egocentric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    /// `d_h x 11` map from normalised state to attention readout.
    pub readout: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    /// Relative residual above which the readout is not trusted.
    pub residual_threshold: f64,
    pub model: ManoeuvreModel,
    pub k: usize,
    pub t_future: usize,
    pub dt: f64,
}

impl OracleParams {
    pub fn new(
        features: &FeatureOracleParams,
        attention: &AttentionParams,
        model: ManoeuvreModel,
        cfg: &DecoderConfig,
        residual_threshold: f64,
    ) -> Result<Self> {
        if features.d_h != attention.d_h {
            return Err(Error::config("feature oracle and attention widths differ"));
        }
        let readout = attention.value_output().transpose() * features.encoding_matrix();
        let svd = readout.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin.is_nan() || smin <= 1e-9 * smax.max(1.0) {
            return Err(Error::config("attention readout cannot be inverted; need d_k >= 11"));
        }
        let pinv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| Error::config(alloc::format!("pseudo-inverse failed: {e}")))?;
        Ok(Self {
            readout,
            pinv,
            residual_threshold,
            model,
            k: cfg.k,
            t_future: cfg.t_future,
            dt: cfg.dt,
        })
    }
}

/// State and detection read back from one query's attention readout.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryReadout {
    /// Ego frame.
    pub state: SemanticState,
    pub residual: f64,
    pub fallback: bool,
    pub detection: DetectionOutput,
}

/// Least-squares inversion of the readout. Objectness decays with the
/// relative residual `||e - A z|| / ||e||`.
pub fn query_head(evidence: &DVector<f64>, params: &OracleParams) -> Result<QueryReadout> {
    if evidence.len() != params.readout.nrows() || !math::all_finite(evidence.as_slice()) {
        return Err(Error::invalid("readout width does not match the oracle decoder"));
    }
    let z = &params.pinv * evidence;
    let fit = &params.readout * &z;
    let norm = evidence.norm();
    let residual = if norm > 0.0 { (evidence - fit).norm() / norm } else { 1.0 };
    let zs: Vec<f64> = z.iter().copied().collect();
    debug_assert_eq!(zs.len(), STATE_DIMS);
    let state = SemanticState::from_vector(&zs);
    let ratio = residual / params.residual_threshold;
    let objectness = math::exp(-ratio * ratio);
    let vehicle_share = zs[7].clamp(0.0, 1.0);
    let vehicle = objectness * vehicle_share;
    let probs = ClassProbs {
        vehicle,
        pedestrian: objectness - vehicle,
        empty: 1.0 - objectness,
    };
    let heading = velocity_heading(state.velocity, 0.0);
    let detection = DetectionOutput {
        probs,
        bbox: BoxParams {
            center: Point3::new(state.position.x, state.position.y, state.size.height / 2.0),
            size: state.size,
            yaw: heading,
            velocity: state.velocity,
        },
    };
    Ok(QueryReadout {
        state,
        residual,
        fallback: residual > params.residual_threshold,
        detection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Manoeuvre {
    Straight,
    Turn(f64, usize),
    Stop(usize),
}

fn candidate_order(intent: Intent, lead: usize, max_delay: usize) -> Vec<Manoeuvre> {
    use Manoeuvre::*;
    let delays_down: Vec<usize> = (1..=lead).rev().collect();
    let mut out: Vec<Manoeuvre> = match intent {
        Intent::TurnLeft | Intent::TurnRight => {
            let s = if intent == Intent::TurnLeft { 1.0 } else { -1.0 };
            let mut v: Vec<Manoeuvre> = delays_down.iter().map(|&d| Turn(s, d)).collect();
            v.extend([Straight, Stop(1), Turn(-s, lead)]);
            v
        }
        Intent::Stopping => {
            let mut v: Vec<Manoeuvre> = delays_down.iter().map(|&d| Stop(d)).collect();
            v.extend([Straight, Turn(1.0, lead), Turn(-1.0, lead)]);
            v
        }
        Intent::None => vec![Straight, Stop(1), Turn(1.0, 1), Turn(-1.0, 1)],
    };
    for d in 1..=max_delay.max(lead) {
        for m in [Turn(1.0, d), Turn(-1.0, d), Stop(d)] {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

fn plan_for(start: &KinematicState, m: Manoeuvre, model: &ManoeuvreModel, dt: f64) -> MotionPlan {
    let v = start.speed;
    let straight = MotionSegment { duration: f64::INFINITY, speed: v, yaw_rate: 0.0 };
    let segments = match m {
        Manoeuvre::Straight => vec![straight],
        Manoeuvre::Turn(sign, d) => vec![
            MotionSegment { duration: d as f64 * dt, speed: v, yaw_rate: 0.0 },
            MotionSegment {
                duration: model.turn_frames as f64 * dt,
                speed: v,
                yaw_rate: sign * model.turn_rate,
            },
            straight,
        ],
        Manoeuvre::Stop(d) => vec![
            MotionSegment { duration: d as f64 * dt, speed: v, yaw_rate: 0.0 },
            MotionSegment { duration: f64::INFINITY, speed: 0.0, yaw_rate: 0.0 },
        ],
    };
    MotionPlan { start: start.position, heading: start.heading, segments }
}

/// `K` rollouts for the given intent, best first. Scores halve from one
/// mode to the next and are normalised to sum to one.
pub fn rollout_modes(
    start: &KinematicState,
    intent: Intent,
    model: &ManoeuvreModel,
    k: usize,
    t_future: usize,
    dt: f64,
    frame: FrameTag,
) -> Result<TrajectoryModeSet> {
    if k == 0 || t_future == 0 {
        return Err(Error::config("K and T_future must be positive"));
    }
    let order = candidate_order(intent, model.lead_frames, t_future + k);
    let modes: Vec<Trajectory> = order
        .iter()
        .take(k)
        .map(|&m| Trajectory::new(plan_for(start, m, model, dt).rollout(dt, t_future), frame))
        .collect();
    let weights: Vec<f64> = (0..modes.len()).map(|i| math::exp(-(i as f64) * core::f64::consts::LN_2)).collect();
    let total: f64 = weights.iter().sum();
    TrajectoryModeSet::new(modes, weights.iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    /// Trajectories in the view frame.
    pub modes: TrajectoryModeSet,
    /// Maps ego-frame coordinates into the view frame (`to_local`).
    pub view_frame: FrameTransform,
    pub readout: QueryReadout,
    pub fallback: bool,
}

/// Decodes the readout, expresses the agent in the requested view, and
/// rolls out its manoeuvres there. On a poor fit the output is `K` copies
/// of the straight extrapolation and `fallback` is set.
pub fn oracle_decoder(
    evidence: &DVector<f64>,
    params: &OracleParams,
    view: View,
    heading_fallback: f64,
) -> Result<OracleOutput> {
    decode_readout(query_head(evidence, params)?, params, view, heading_fallback)
}

/// Frame that maps ego coordinates into the requested view of `state`.
pub fn view_frame(state: &SemanticState, view: View, heading_fallback: f64) -> FrameTransform {
    match view {
        View::Egocentric => FrameTransform::IDENTITY,
        View::Allocentric => FrameTransform::new(state.position, velocity_heading(state.velocity, heading_fallback)),
    }
}

/// Second half of [`oracle_decoder`], for a readout already in hand.
pub fn decode_readout(
    readout: QueryReadout,
    params: &OracleParams,
    view: View,
    heading_fallback: f64,
) -> Result<OracleOutput> {
    let s = &readout.state;
    let heading = velocity_heading(s.velocity, heading_fallback);
    let view_frame = view_frame(s, view, heading_fallback);
    let start = KinematicState {
        position: view_frame.to_local(s.position),
        heading: view_frame.heading_to_local(heading),
        speed: s.velocity.norm(),
    };
    let tag = match view {
        View::Egocentric => FrameTag::Ego,
        View::Allocentric => FrameTag::Allocentric,
    };
    let modes = if readout.fallback {
        let plan = plan_for(&start, Manoeuvre::Straight, &params.model, params.dt);
        let t = Trajectory::new(plan.rollout(params.dt, params.t_future), tag);
        TrajectoryModeSet::new(vec![t; params.k], vec![1.0 / params.k as f64; params.k])?
    } else {
        rollout_modes(&start, s.intent, &params.model, params.k, params.t_future, params.dt, tag)?
    };
    Ok(OracleOutput { fallback: readout.fallback, modes, view_frame, readout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::scenario::{feature_oracle, AgentType, BoxSize};

    fn setup() -> (FeatureOracleParams, AttentionParams, OracleParams) {
        let f = FeatureOracleParams::new(32, 0.0, 1).unwrap();
        let a = AttentionParams::seeded(32, 16, 2).unwrap();
        let o = OracleParams::new(&f, &a, ManoeuvreModel::default(), &DecoderConfig::default(), 0.1).unwrap();
        (f, a, o)
    }

    fn evidence(state: &SemanticState, f: &FeatureOracleParams, a: &AttentionParams) -> DVector<f64> {
        let feat = feature_oracle(state, f, &mut math::rng_from(0)).unwrap();
        a.value_output().transpose() * feat
    }

    fn agent(v: Point2, intent: Intent) -> SemanticState {
        SemanticState {
            position: Point2::new(5.0, 12.0),
            velocity: v,
            intent,
            agent_type: AgentType::Vehicle,
            size: BoxSize { length: 4.5, width: 1.9, height: 1.6 },
        }
    }

    #[test]
    fn readout_inverts_state() {
        let (f, a, o) = setup();
        let s = agent(Point2::new(3.0, -4.0), Intent::TurnRight);
        let r = query_head(&evidence(&s, &f, &a), &o).unwrap();
        assert!(!r.fallback && r.residual < 1e-9);
        assert!(r.state.position.distance(s.position) < 1e-9);
        assert_eq!(r.state.intent, Intent::TurnRight);
        assert!(r.detection.probs.vehicle > 0.999);
        let noise = math::uniform_vector(&mut math::rng_from(5), 32, 1.0);
        let bad = query_head(&noise, &o).unwrap();
        assert!(bad.fallback && bad.detection.probs.empty > 0.9);
    }

    #[test]
    fn turn_left_top_mode_turns_left() {
        let (f, a, o) = setup();
        let s = agent(Point2::new(0.0, 8.0), Intent::TurnLeft);
        let out = oracle_decoder(&evidence(&s, &f, &a), &o, View::Allocentric, 0.0).unwrap();
        let top = &out.modes.modes[out.modes.top()];
        assert!(top.last().unwrap().x < -10.0);
        let ego = oracle_decoder(&evidence(&s, &f, &a), &o, View::Egocentric, 0.0).unwrap();
        assert!(ego.modes.modes[ego.modes.top()].last().unwrap().x < -5.0);
    }

    #[test]
    fn stationary_stop_is_zero_displacement() {
        let (f, a, o) = setup();
        let s = agent(Point2::ZERO, Intent::Stopping);
        let out = oracle_decoder(&evidence(&s, &f, &a), &o, View::Allocentric, 0.0).unwrap();
        for p in &out.modes.modes[out.modes.top()].waypoints {
            assert!(p.norm() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_readout_rejected() {
        let f = FeatureOracleParams::new(32, 0.0, 1).unwrap();
        let a = AttentionParams::seeded(32, 8, 2).unwrap();
        assert!(OracleParams::new(&f, &a, ManoeuvreModel::default(), &DecoderConfig::default(), 0.1).is_err());
    }

    #[test]
    fn candidate_lists_have_no_duplicates() {
        for intent in [Intent::None, Intent::TurnLeft, Intent::TurnRight, Intent::Stopping] {
            let c = candidate_order(intent, 3, 12);
            for (i, m) in c.iter().enumerate() {
                assert!(!c[i + 1..].contains(m));
            }
        }
    }
}
