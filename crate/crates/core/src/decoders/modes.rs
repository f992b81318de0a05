use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{transform_trajectory, Direction, FrameTransform, Point2, Trajectory};

/// `K` candidate futures with per-mode scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryModeSet {
    pub modes: Vec<Trajectory>,
    pub scores: Vec<f64>,
}

impl TrajectoryModeSet {
    pub fn new(modes: Vec<Trajectory>, scores: Vec<f64>) -> Result<Self> {
        if modes.is_empty() || modes.len() != scores.len() {
            return Err(Error::invalid("mode set needs one score per mode and at least one mode"));
        }
        let t = modes[0].len();
        if modes.iter().any(|m| m.len() != t || !m.is_finite()) {
            return Err(Error::invalid("modes must share one finite horizon"));
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid("mode scores must lie in [0, 1]"));
        }
        Ok(Self { modes, scores })
    }

    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn horizon(&self) -> usize {
        self.modes.first().map_or(0, Trajectory::len)
    }

    /// Highest-scored mode, lowest index on ties.
    pub fn top(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn transform(&self, frame: &FrameTransform, direction: Direction) -> Result<Self> {
        let modes = self
            .modes
            .iter()
            .map(|m| transform_trajectory(m, frame, direction))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { modes, scores: self.scores.clone() })
    }
}

/// A candidate endpoint: sampled anchor, score, and regressed offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalCandidate {
    pub position: Point2,
    pub score: f64,
    pub offset: Point2,
}

impl GoalCandidate {
    pub fn goal(&self) -> Point2 {
        self.position + self.offset
    }
}

/// Dense goal scores on a square grid with 1 m spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalHeatmap {
    pub center: Point2,
    pub side: f64,
    pub spacing: f64,
    pub cells: Vec<(Point2, f64)>,
}

impl GoalHeatmap {
    pub fn cells_per_side(&self) -> usize {
        (self.side / self.spacing) as usize + 1
    }
}

/// Greedy non-maximum suppression on `goal()` positions. Highest score
/// first (lowest index on ties); every remaining candidate within `radius`
/// of a selected one is dropped.
pub fn nms_select(candidates: &[GoalCandidate], k: usize, radius: f64) -> Result<Vec<GoalCandidate>> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::config("NMS radius must be positive"));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].score.total_cmp(&candidates[a].score).then(a.cmp(&b)));
    let mut alive = alloc::vec![true; candidates.len()];
    let mut out = Vec::new();
    for &i in &order {
        if out.len() == k {
            break;
        }
        if !alive[i] {
            continue;
        }
        let g = candidates[i].goal();
        out.push(candidates[i]);
        for (j, c) in candidates.iter().enumerate() {
            if alive[j] && c.goal().distance(g) <= radius {
                alive[j] = false;
            }
        }
    }
    Ok(out)
}
