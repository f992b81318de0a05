//! Agent queries and their initialise / track / discard lifecycle.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;

use super::bank::QueryMemoryBank;
use crate::assignment::SupervisionAssignment;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::math;
use crate::scenario::TrackId;

/// Radius of the disc that initial reference points are drawn from.
pub const INIT_REFERENCE_RADIUS: f64 = 40.0;
pub const INIT_REFERENCE_HEIGHT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lifecycle {
    Empty,
    Tracked(TrackId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentQuery {
    pub index: usize,
    pub feature: DVector<f64>,
    /// Ego-frame reference point.
    pub reference: Point3,
    pub lifecycle: Lifecycle,
    pub age: u32,
}

impl AgentQuery {
    /// Seeded initial embedding and reference point for slot `index`.
    pub fn fresh(index: usize, d_h: usize, seed: u64) -> Self {
        let mut rng = math::rng_from(math::derive_seed(seed, &[0x0E4B, index as u64]));
        let feature = math::uniform_vector(&mut rng, d_h, math::init_bound(d_h));
        let r = INIT_REFERENCE_RADIUS * math::sqrt(rng.random::<f64>());
        let a = rng.random_range(-core::f64::consts::PI..core::f64::consts::PI);
        Self {
            index,
            feature,
            reference: Point3::new(r * math::cos(a), r * math::sin(a), INIT_REFERENCE_HEIGHT),
            lifecycle: Lifecycle::Empty,
            age: 0,
        }
    }

    pub fn track(&self) -> Option<TrackId> {
        match self.lifecycle {
            Lifecycle::Tracked(id) => Some(id),
            Lifecycle::Empty => None,
        }
    }
}

/// Queries, their memory bank, and the next track id to hand out.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState {
    pub queries: Vec<AgentQuery>,
    pub bank: QueryMemoryBank,
    pub next_track_id: u32,
}

impl QueryState {
    pub fn new(n_query: usize, d_h: usize, bank_size: usize, seed: u64) -> Self {
        Self {
            queries: (0..n_query).map(|i| AgentQuery::fresh(i, d_h, seed)).collect(),
            bank: QueryMemoryBank::new(bank_size),
            next_track_id: 0,
        }
    }
}

/// Applies one frame of supervision: released queries are reset to their
/// fresh state and their history dropped; newly matched queries receive a
/// new track id, age 0, and the target centre as reference point.
pub fn lifecycle_step(state: &QueryState, supervision: &SupervisionAssignment, seed: u64) -> Result<QueryState> {
    if supervision.queries.len() != state.queries.len() {
        return Err(Error::invalid(format!(
            "supervision covers {} of {} queries",
            supervision.queries.len(),
            state.queries.len()
        )));
    }
    let mut next = state.clone();
    for (q, s) in next.queries.iter_mut().zip(&supervision.queries) {
        if s.reinit {
            if let Some(id) = q.track() {
                next.bank.clear(id);
            }
            *q = AgentQuery::fresh(q.index, q.feature.len(), seed);
        } else if s.newly_matched {
            if let Some(id) = q.track() {
                next.bank.clear(id);
            }
            q.lifecycle = Lifecycle::Tracked(TrackId(next.next_track_id));
            next.next_track_id += 1;
            q.age = 0;
            if let Some(t) = s.target {
                q.reference = t.bbox.center;
            }
        }
    }
    Ok(next)
}
