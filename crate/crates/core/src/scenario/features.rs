//! Seeded stand-in for the camera backbone: maps an agent's state to a
//! feature vector whose first seven coordinates are readable semantics and
//! whose remainder is a fixed random projection plus Gaussian noise.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{AgentType, BoxSize, Intent};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::math;

/// Readable leading coordinates: position (2), velocity (2), intent (3).
pub const SEMANTIC_DIMS: usize = 7;
/// Length of the normalised state vector fed through the projection.
pub const STATE_DIMS: usize = 11;
pub const POSITION_SCALE: f64 = 50.0;
pub const VELOCITY_SCALE: f64 = 10.0;
pub const SIZE_SCALE: f64 = 5.0;

/// Agent state as the sensor sees it, in the ego frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticState {
    pub position: Point2,
    pub velocity: Point2,
    pub intent: Intent,
    pub agent_type: AgentType,
    pub size: BoxSize,
}

impl SemanticState {
    /// Normalised vector: `[x, y, vx, vy, left, right, stop, vehicle, l, w, h]`.
    /// The intent `none` is the all-zero pattern in slots 4..7.
    pub fn to_vector(&self) -> [f64; STATE_DIMS] {
        let (l, r, s) = match self.intent {
            Intent::None => (0.0, 0.0, 0.0),
            Intent::TurnLeft => (1.0, 0.0, 0.0),
            Intent::TurnRight => (0.0, 1.0, 0.0),
            Intent::Stopping => (0.0, 0.0, 1.0),
        };
        [
            self.position.x / POSITION_SCALE,
            self.position.y / POSITION_SCALE,
            self.velocity.x / VELOCITY_SCALE,
            self.velocity.y / VELOCITY_SCALE,
            l,
            r,
            s,
            if self.agent_type == AgentType::Vehicle { 1.0 } else { 0.0 },
            self.size.length / SIZE_SCALE,
            self.size.width / SIZE_SCALE,
            self.size.height / SIZE_SCALE,
        ]
    }

    /// Inverse of [`to_vector`](Self::to_vector); categorical slots are
    /// decoded by largest activation.
    pub fn from_vector(v: &[f64]) -> SemanticState {
        let intent = {
            let (l, r, s) = (v[4], v[5], v[6]);
            let best = l.max(r).max(s);
            if best < 0.5 {
                Intent::None
            } else if best == l {
                Intent::TurnLeft
            } else if best == r {
                Intent::TurnRight
            } else {
                Intent::Stopping
            }
        };
        SemanticState {
            position: Point2::new(v[0] * POSITION_SCALE, v[1] * POSITION_SCALE),
            velocity: Point2::new(v[2] * VELOCITY_SCALE, v[3] * VELOCITY_SCALE),
            intent,
            agent_type: if v[7] >= 0.5 { AgentType::Vehicle } else { AgentType::Pedestrian },
            size: BoxSize {
                length: v[8] * SIZE_SCALE,
                width: v[9] * SIZE_SCALE,
                height: v[10] * SIZE_SCALE,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOracleParams {
    pub d_h: usize,
    pub sigma: f64,
    pub seed: u64,
    /// `(d_h - 7) x 11`, entries uniform in `[-1/sqrt(11), 1/sqrt(11))`.
    pub projection: DMatrix<f64>,
}

impl FeatureOracleParams {
    pub fn new(d_h: usize, sigma: f64, seed: u64) -> Result<Self> {
        if d_h < 8 {
            return Err(Error::config(alloc::format!("feature width d_h must be >= 8, got {d_h}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config("feature noise sigma must be finite and >= 0"));
        }
        let mut rng = math::rng_from(math::derive_seed(seed, &[0xFEA7]));
        let projection =
            math::uniform_matrix(&mut rng, d_h - SEMANTIC_DIMS, STATE_DIMS, math::init_bound(STATE_DIMS));
        Ok(Self { d_h, sigma, seed, projection })
    }

    /// The noiseless linear map `feature = M * state_vector`, `d_h x 11`.
    pub fn encoding_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d_h, STATE_DIMS);
        for i in 0..SEMANTIC_DIMS {
            m[(i, i)] = 1.0;
        }
        m.view_mut((SEMANTIC_DIMS, 0), (self.d_h - SEMANTIC_DIMS, STATE_DIMS))
            .copy_from(&self.projection);
        m
    }
}

/// Feature vector of length `d_h` for one agent state.
pub fn feature_oracle<R: Rng + ?Sized>(
    state: &SemanticState,
    params: &FeatureOracleParams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if params.d_h < 8 || params.projection.nrows() != params.d_h - SEMANTIC_DIMS {
        return Err(Error::config("feature oracle parameters are inconsistent with d_h"));
    }
    let z = state.to_vector();
    if !math::all_finite(&z) {
        return Err(Error::invalid("non-finite agent state"));
    }
    let zv = DVector::from_row_slice(&z);
    let projected = &params.projection * &zv;
    let mut out = Vec::with_capacity(params.d_h);
    out.extend_from_slice(&z[..SEMANTIC_DIMS]);
    for p in projected.iter() {
        let noise = if params.sigma > 0.0 {
            let n: f64 = rng.sample(StandardNormal);
            params.sigma * n
        } else {
            0.0
        };
        out.push(p + noise);
    }
    Ok(DVector::from_vec(out))
}
