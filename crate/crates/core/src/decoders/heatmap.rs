use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::goal::{complete_all, completion_loss, score_goal, Completion, GoalDecoderParams};
use super::losses::bce;
use super::modes::{nms_select, GoalCandidate, GoalHeatmap, TrajectoryModeSet};
use super::DecoderConfig;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Trajectory};
use crate::math;

pub const HEATMAP_SPACING: f64 = 1.0;

/// Cell centres of a square grid of side `side` (a positive multiple of
/// 1 m) centred on `center`, row by row.
pub fn heatmap_grid(center: Point2, side: f64) -> Result<Vec<Point2>> {
    if side.is_nan() || side <= 0.0 || math::floor(side) != side || !side.is_finite() {
        return Err(Error::config(format!("heatmap side must be a positive multiple of 1 m, got {side}")));
    }
    let n = side as usize + 1;
    let half = side / 2.0;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(center + Point2::new(-half + i as f64, -half + j as f64));
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOutput {
    pub modes: TrajectoryModeSet,
    pub heatmap: GoalHeatmap,
    pub completion: Completion,
    /// How many of the requested `K` modes NMS could not supply.
    pub shortfall: usize,
}

/// Scores every 1 m cell, keeps `K` by NMS and completes each.
pub fn heatmap_decode(query: &DVector<f64>, params: &GoalDecoderParams) -> Result<HeatmapOutput> {
    let cfg = &params.config;
    if query.len() + 2 != params.score.input_dim() {
        return Err(Error::invalid("query does not fit the heatmap decoder"));
    }
    let grid = heatmap_grid(Point2::ZERO, cfg.heatmap_side)?;
    let candidates: Vec<GoalCandidate> = grid
        .iter()
        .map(|&p| GoalCandidate { offset: Point2::ZERO, ..score_goal(query, p, params) })
        .collect();
    let selected = nms_select(&candidates, cfg.k, cfg.nms_radius)?;
    let (modes, completion) = complete_all(query, &selected, params)?;
    Ok(HeatmapOutput {
        shortfall: cfg.k - selected.len(),
        modes,
        heatmap: GoalHeatmap {
            center: Point2::ZERO,
            side: cfg.heatmap_side,
            spacing: HEATMAP_SPACING,
            cells: candidates.iter().map(|c| (c.position, c.score)).collect(),
        },
        completion,
    })
}

/// `L_cls + L_completion` with one BCE term per cell, positive iff the
/// cell centre lies within `tau_goal` of the true endpoint.
pub fn heatmap_loss(
    heatmap: &GoalHeatmap,
    completion: &Completion,
    gt: &Trajectory,
    cfg: &DecoderConfig,
) -> Result<f64> {
    let Some(end) = gt.last() else {
        return Err(Error::invalid("ground truth trajectory is empty"));
    };
    let cls: f64 = heatmap
        .cells
        .iter()
        .map(|&(p, s)| bce(s, if p.distance(end) <= cfg.tau_goal { 1.0 } else { 0.0 }))
        .sum();
    Ok(cls + completion_loss(completion, gt, cfg.delta)?)
}
