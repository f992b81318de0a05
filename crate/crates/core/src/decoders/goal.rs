use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;

use super::losses::{bce, smooth_l1, trajectory_loss};
use super::mlp::{logistic, Mlp};
use super::modes::{nms_select, GoalCandidate, TrajectoryModeSet};
use super::DecoderConfig;
use crate::error::{Error, Result};
use crate::geometry::{FrameTag, Point2, Trajectory};
use crate::math;

const GOAL_SCALE: f64 = 50.0;

/// Scoring, offset and completion maps over `(query, goal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalDecoderParams {
    pub score: Mlp,
    pub offset: Mlp,
    pub completion: Mlp,
    pub config: DecoderConfig,
}

impl GoalDecoderParams {
    pub fn seeded(d_h: usize, config: &DecoderConfig, seed: u64) -> Self {
        let input = d_h + 2;
        Self {
            score: Mlp::seeded(input, config.hidden, 1, math::derive_seed(seed, &[0x60A1, 0])),
            offset: Mlp::seeded(input, config.hidden, 2, math::derive_seed(seed, &[0x60A1, 1])),
            completion: Mlp::seeded(input, config.hidden, config.t_future * 2, math::derive_seed(seed, &[0x60A1, 2])),
            config: *config,
        }
    }
}

fn joint_input(query: &DVector<f64>, goal: Point2) -> DVector<f64> {
    let mut v = Vec::with_capacity(query.len() + 2);
    v.extend_from_slice(query.as_slice());
    v.push(goal.x / GOAL_SCALE);
    v.push(goal.y / GOAL_SCALE);
    DVector::from_vec(v)
}

/// Logistic score and offset for one anchor.
pub fn score_goal(query: &DVector<f64>, anchor: Point2, params: &GoalDecoderParams) -> GoalCandidate {
    let x = joint_input(query, anchor);
    let s = params.score.forward(&x)[0];
    let o = params.offset.forward(&x);
    GoalCandidate {
        position: anchor,
        score: logistic(s),
        offset: Point2::new(o[0], o[1]),
    }
}

/// Straight-line interpolation from the origin to `goal` plus a learned
/// residual per step.
pub fn complete_goal(query: &DVector<f64>, goal: Point2, params: &GoalDecoderParams) -> Trajectory {
    let r = params.completion.forward(&joint_input(query, goal));
    let t = params.config.t_future;
    let pts = (0..t)
        .map(|s| goal * ((s + 1) as f64 / t as f64) + Point2::new(r[2 * s], r[2 * s + 1]))
        .collect();
    Trajectory::new(pts, FrameTag::Allocentric)
}

/// Selected goals and their completed trajectories, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub goals: Vec<Point2>,
    pub trajectories: Vec<Trajectory>,
}

impl Completion {
    fn loss(&self, gt: &Trajectory, delta: f64) -> Result<f64> {
        let Some(end) = gt.last() else {
            return Err(Error::invalid("ground truth trajectory is empty"));
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.goals.iter().enumerate() {
            let d = g.distance(end);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => trajectory_loss(&self.trajectories[i], gt, delta),
            None => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalIntermediates {
    pub candidates: Vec<GoalCandidate>,
    pub completion: Completion,
}

/// Samples `n_goal` anchors uniformly in a disc of radius
/// `max(r_min, speed * horizon)`, scores and offsets them, keeps `K` by NMS
/// and completes each into a trajectory.
pub fn goal_decode<R: Rng + ?Sized>(
    query: &DVector<f64>,
    speed: f64,
    rng: &mut R,
    params: &GoalDecoderParams,
) -> Result<(TrajectoryModeSet, GoalIntermediates)> {
    let cfg = &params.config;
    if query.len() + 2 != params.score.input_dim() {
        return Err(Error::invalid("query does not fit the goal decoder"));
    }
    if cfg.n_goal < cfg.k {
        return Err(Error::config("n_goal must be at least K"));
    }
    let radius = cfg.r_min.max(speed.abs() * cfg.horizon());
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("goal sampling radius is zero: r_min = 0 and agent is stationary"));
    }
    let candidates: Vec<GoalCandidate> = (0..cfg.n_goal)
        .map(|_| {
            let r = radius * math::sqrt(rng.random::<f64>());
            let a = rng.random_range(-core::f64::consts::PI..core::f64::consts::PI);
            score_goal(query, Point2::new(r * math::cos(a), r * math::sin(a)), params)
        })
        .collect();
    let selected = nms_select(&candidates, cfg.k, cfg.nms_radius)?;
    let (modes, completion) = complete_all(query, &selected, params)?;
    Ok((modes, GoalIntermediates { candidates, completion }))
}

pub(super) fn complete_all(
    query: &DVector<f64>,
    selected: &[GoalCandidate],
    params: &GoalDecoderParams,
) -> Result<(TrajectoryModeSet, Completion)> {
    let goals: Vec<Point2> = selected.iter().map(GoalCandidate::goal).collect();
    let trajectories: Vec<Trajectory> = goals.iter().map(|&g| complete_goal(query, g, params)).collect();
    let scores = selected.iter().map(|c| c.score).collect();
    let modes = TrajectoryModeSet::new(trajectories.clone(), scores)?;
    Ok((modes, Completion { goals, trajectories }))
}

/// `L_cls + L_reg + L_completion`: BCE over all candidates (positive iff
/// the anchor lies within `tau_goal` of the true endpoint), smooth L1 of
/// the offset goal of positive candidates toward the endpoint, and the
/// completion loss of the mode whose goal is nearest the endpoint.
pub fn goal_loss(inter: &GoalIntermediates, gt: &Trajectory, cfg: &DecoderConfig) -> Result<f64> {
    let Some(end) = gt.last() else {
        return Err(Error::invalid("ground truth trajectory is empty"));
    };
    let mut cls = 0.0;
    let mut reg = 0.0;
    for c in &inter.candidates {
        let positive = c.position.distance(end) <= cfg.tau_goal;
        cls += bce(c.score, if positive { 1.0 } else { 0.0 });
        if positive {
            reg += smooth_l1(c.goal(), end, cfg.delta);
        }
    }
    Ok(cls + reg + inter.completion.loss(gt, cfg.delta)?)
}

pub(super) fn completion_loss(c: &Completion, gt: &Trajectory, delta: f64) -> Result<f64> {
    c.loss(gt, delta)
}
