use crate::error::{Error, Result};
use crate::geometry::{Point2, Trajectory};
use crate::math;

use super::modes::TrajectoryModeSet;

pub const SMOOTH_L1_DELTA: f64 = 1.0;
pub const LOG_FLOOR: f64 = 1e-12;

pub fn smooth_l1_scalar(x: f64, delta: f64) -> f64 {
    let a = x.abs();
    if a < delta {
        0.5 * a * a / delta
    } else {
        a - 0.5 * delta
    }
}

/// Per-coordinate smooth L1, summed.
pub fn smooth_l1(a: Point2, b: Point2, delta: f64) -> f64 {
    smooth_l1_scalar(a.x - b.x, delta) + smooth_l1_scalar(a.y - b.y, delta)
}

/// Binary cross-entropy with log arguments floored at `1e-12`; a term whose
/// label weight is zero is skipped.
pub fn bce(p: f64, label: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let mut loss = 0.0;
    if label != 0.0 {
        loss -= label * math::ln(p.max(LOG_FLOOR));
    }
    if label != 1.0 {
        loss -= (1.0 - label) * math::ln((1.0 - p).max(LOG_FLOOR));
    }
    loss
}

/// `sum_t smooth_l1(s_t, s^_t)`.
pub fn trajectory_loss(pred: &Trajectory, gt: &Trajectory, delta: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::invalid("trajectory lengths differ"));
    }
    Ok(pred.waypoints.iter().zip(&gt.waypoints).map(|(&a, &b)| smooth_l1(a, b, delta)).sum())
}

/// Index of the mode closest to `gt` by `sum_t ||s_t - s^_t||` (lowest
/// index on ties) together with that distance.
pub fn variety_select(pred: &TrajectoryModeSet, gt: &Trajectory) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, m) in pred.modes.iter().enumerate() {
        if m.len() != gt.len() {
            return Err(Error::invalid("mode length differs from ground truth"));
        }
        let d: f64 = m.waypoints.iter().zip(&gt.waypoints).map(|(&a, &b)| a.distance(b)).sum();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best.ok_or_else(|| Error::invalid("mode set is empty"))
}

/// Min-of-K loss: the trajectory loss of the closest mode only.
pub fn variety_loss(pred: &TrajectoryModeSet, gt: &Trajectory, delta: f64) -> Result<f64> {
    let (k, _) = variety_select(pred, gt)?;
    trajectory_loss(&pred.modes[k], gt, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameTag;
    use alloc::vec;

    #[test]
    fn smooth_l1_branches() {
        assert_eq!(smooth_l1(Point2::new(1.0, 2.0), Point2::new(1.0, 2.0), 1.0), 0.0);
        let inner: f64 = 0.5 * 1.0 * 1.0 / 1.0;
        let outer = 1.0 - 0.5 * 1.0;
        assert!((inner - outer).abs() < 1e-12);
        assert_eq!(smooth_l1_scalar(1.0, 1.0), 0.5);
        assert!((smooth_l1_scalar(1.0 - 1e-13, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(smooth_l1_scalar(-3.0, 1.0), 2.5);
    }

    #[test]
    fn bce_values() {
        assert!((bce(0.5, 1.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(bce(1.0, 1.0), 0.0);
        assert_eq!(bce(0.0, 0.0), 0.0);
        assert!((bce(0.0, 1.0) + (1e-12f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn variety_picks_closest() {
        let gt = Trajectory::new(vec![Point2::new(0.0, 1.0), Point2::new(0.0, 2.0)], FrameTag::Allocentric);
        let off = Trajectory::new(vec![Point2::new(3.0, 1.0), Point2::new(3.0, 2.0)], FrameTag::Allocentric);
        let set = TrajectoryModeSet::new(vec![off.clone(), gt.clone(), gt.clone()], vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(variety_select(&set, &gt).unwrap(), (1, 0.0));
        assert_eq!(variety_loss(&set, &gt, 1.0).unwrap(), 0.0);
        let single = TrajectoryModeSet::new(vec![off.clone()], vec![1.0]).unwrap();
        assert_eq!(variety_loss(&single, &gt, 1.0).unwrap(), trajectory_loss(&off, &gt, 1.0).unwrap());
        assert_eq!(trajectory_loss(&off, &gt, 1.0).unwrap(), 5.0);
    }
}
