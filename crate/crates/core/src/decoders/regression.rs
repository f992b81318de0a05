use alloc::vec::Vec;

use nalgebra::DVector;

use super::mlp::Mlp;
use super::modes::TrajectoryModeSet;
use super::DecoderConfig;
use crate::error::{Error, Result};
use crate::geometry::{FrameTag, Point2, Trajectory};
use crate::math;
use crate::query_bank::softmax;

/// Metres per unit of raw regression output.
const OUTPUT_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDecoder {
    pub mlp: Mlp,
    pub k: usize,
    pub t_future: usize,
}

impl RegressionDecoder {
    pub fn seeded(d_h: usize, cfg: &DecoderConfig, seed: u64) -> Self {
        let out = cfg.k * cfg.t_future * 2 + cfg.k;
        Self {
            mlp: Mlp::seeded(d_h, cfg.hidden, out, math::derive_seed(seed, &[0x4E6])),
            k: cfg.k,
            t_future: cfg.t_future,
        }
    }
}

/// `K` allocentric trajectories read directly off one feedforward pass;
/// the trailing `K` outputs are softmaxed into mode scores.
pub fn regression_decode(query: &DVector<f64>, dec: &RegressionDecoder) -> Result<TrajectoryModeSet> {
    if query.len() != dec.mlp.input_dim() || !math::all_finite(query.as_slice()) {
        return Err(Error::invalid("query does not fit the regression decoder"));
    }
    let raw = dec.mlp.forward(query);
    let (k, t) = (dec.k, dec.t_future);
    let modes = (0..k)
        .map(|m| {
            let pts = (0..t)
                .map(|s| {
                    let i = (m * t + s) * 2;
                    Point2::new(raw[i] * OUTPUT_SCALE, raw[i + 1] * OUTPUT_SCALE)
                })
                .collect();
            Trajectory::new(pts, FrameTag::Allocentric)
        })
        .collect::<Vec<_>>();
    let logits: Vec<f64> = (0..k).map(|m| raw[k * t * 2 + m]).collect();
    TrajectoryModeSet::new(modes, softmax(&logits))
}
