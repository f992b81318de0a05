//! Per-track FIFO of past query states and the temporal attention over it.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::attention::{cross_attention_update, stack_rows, AttentionParams};
use super::lifecycle::{AgentQuery, Lifecycle};
use crate::error::{Error, Result};
use crate::scenario::TrackId;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMemoryBank {
    capacity: usize,
    entries: BTreeMap<TrackId, VecDeque<DVector<f64>>>,
}

impl QueryMemoryBank {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: BTreeMap::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn history(&self, id: TrackId) -> Vec<&DVector<f64>> {
        self.entries.get(&id).map(|q| q.iter().collect()).unwrap_or_default()
    }

    pub fn len(&self, id: TrackId) -> usize {
        self.entries.get(&id).map_or(0, VecDeque::len)
    }

    pub fn tracks(&self) -> impl Iterator<Item = TrackId> + '_ {
        self.entries.keys().copied()
    }

    pub fn push(&mut self, id: TrackId, state: DVector<f64>) {
        if self.capacity == 0 {
            return;
        }
        let q = self.entries.entry(id).or_default();
        while q.len() >= self.capacity {
            q.pop_front();
        }
        q.push_back(state);
    }

    pub fn clear(&mut self, id: TrackId) {
        self.entries.remove(&id);
    }
}

pub fn bank_push(mut bank: QueryMemoryBank, id: TrackId, state: DVector<f64>) -> QueryMemoryBank {
    bank.push(id, state);
    bank
}

/// `q' = FFN(q + q~)` with attention restricted to the query's own history.
/// Identity for empty queries and tracks without history.
pub fn temporal_bank_attention(
    query: &AgentQuery,
    bank: &QueryMemoryBank,
    params: &AttentionParams,
) -> Result<AgentQuery> {
    if query.feature.len() != params.d_h {
        return Err(Error::invalid("query width does not match temporal attention"));
    }
    let Lifecycle::Tracked(id) = query.lifecycle else {
        return Ok(query.clone());
    };
    let history = bank.history(id);
    if history.is_empty() {
        return Ok(query.clone());
    }
    let owned: Vec<DVector<f64>> = history.into_iter().cloned().collect();
    let kv = stack_rows(&owned, params.d_h);
    let q = DMatrix::from_row_slice(1, params.d_h, query.feature.as_slice());
    let out = cross_attention_update(&q, &kv, params)?;
    let mut next = query.clone();
    next.feature = out.queries.row(0).transpose();
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use alloc::vec;

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(3, x)
    }

    #[test]
    fn fifo_eviction() {
        let mut bank = QueryMemoryBank::new(4);
        bank = bank_push(bank, TrackId(0), v(1.0));
        assert_eq!(bank.len(TrackId(0)), 1);
        for i in 2..=6 {
            bank.push(TrackId(0), v(i as f64));
        }
        let h: Vec<f64> = bank.history(TrackId(0)).iter().map(|x| x[0]).collect();
        assert_eq!(h, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn interleaved_tracks_match_queue_oracle() {
        let mut bank = QueryMemoryBank::new(3);
        let mut oracle: [VecDeque<f64>; 2] = [VecDeque::new(), VecDeque::new()];
        let mut rng = math::rng_from(4);
        for step in 0..40 {
            let t = (math::uniform_vector(&mut rng, 1, 1.0)[0] > 0.0) as usize;
            bank.push(TrackId(t as u32), v(step as f64));
            oracle[t].push_back(step as f64);
            if oracle[t].len() > 3 {
                oracle[t].pop_front();
            }
            for (k, o) in oracle.iter().enumerate() {
                let got: Vec<f64> = bank.history(TrackId(k as u32)).iter().map(|x| x[0]).collect();
                assert_eq!(got, o.iter().copied().collect::<Vec<_>>());
            }
        }
    }

    fn tracked(d: usize, seed: u64) -> AgentQuery {
        let mut q = AgentQuery::fresh(0, d, seed);
        q.lifecycle = Lifecycle::Tracked(TrackId(1));
        q
    }

    #[test]
    fn identity_without_history() {
        let p = AttentionParams::seeded(8, 8, 2).unwrap();
        let q = tracked(8, 1);
        let bank = QueryMemoryBank::new(4);
        assert_eq!(temporal_bank_attention(&q, &bank, &p).unwrap(), q);
    }

    #[test]
    fn duplicate_entries_match_single() {
        let p = AttentionParams::seeded(8, 8, 2).unwrap();
        let q = tracked(8, 1);
        let h = math::uniform_vector(&mut math::rng_from(3), 8, 1.0);
        let one = bank_push(QueryMemoryBank::new(4), TrackId(1), h.clone());
        let two = bank_push(one.clone(), TrackId(1), h);
        let a = temporal_bank_attention(&q, &one, &p).unwrap();
        let b = temporal_bank_attention(&q, &two, &p).unwrap();
        assert!((a.feature - b.feature).amax() < 1e-12);
    }

    #[test]
    fn three_entries_match_oracle() {
        let d = 6;
        let p = AttentionParams::seeded(d, d, 8).unwrap();
        let q = tracked(d, 5);
        let mut bank = QueryMemoryBank::new(4);
        let mut rng = math::rng_from(6);
        let hist: Vec<DVector<f64>> = (0..3).map(|_| math::uniform_vector(&mut rng, d, 1.0)).collect();
        for h in &hist {
            bank.push(TrackId(1), h.clone());
        }
        let got = temporal_bank_attention(&q, &bank, &p).unwrap();
        let qk = p.w_q.transpose() * &q.feature;
        let logits: Vec<f64> = hist.iter().map(|h| qk.dot(&(p.w_k.transpose() * h)) / (d as f64).sqrt()).collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut mix = DVector::zeros(d);
        for (w, h) in e.iter().zip(&hist) {
            mix += p.w_v.transpose() * h * (w / z);
        }
        let expect = p.ffn.forward(&(&q.feature + mix));
        assert!((got.feature - expect).amax() < 1e-9);
    }
}
