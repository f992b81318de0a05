//! minADE / minFDE / miss rate and End-to-end Prediction Accuracy, with
//! per-type counters that merge across steps and scenes.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, CostMatrix, MatchResult};
use crate::decoders::TrajectoryModeSet;
use crate::error::{Error, Result};
use crate::geometry::{displacement_errors, Point2, Trajectory};
use crate::scenario::{AgentType, TrackId};

/// A pipeline's output for one agent at one step, in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedAgent {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    pub position: Point2,
    pub modes: TrajectoryModeSet,
}

/// A ground-truth agent at one step. `future` is `None` when the agent is
/// not present for the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFuture {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    pub position: Point2,
    pub future: Option<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub k: usize,
    pub t_future: usize,
    pub tau_epa: f64,
    pub alpha: f64,
    pub miss_threshold: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            k: 6,
            t_future: 12,
            tau_epa: 2.0,
            alpha: 0.5,
            miss_threshold: 2.0,
        }
    }
}

/// Bipartite matching on current positions with cost `||s0 - s^0||`,
/// forbidden beyond `tau`. Rows are predictions, columns ground truth.
pub fn epa_match(preds: &[Point2], gts: &[Point2], tau: f64) -> Result<MatchResult> {
    let cost = CostMatrix::from_fn(preds.len(), gts.len(), |i, j| {
        let d = preds[i].distance(gts[j]);
        if d <= tau {
            d
        } else {
            f64::INFINITY
        }
    });
    hungarian(&cost)
}

/// `(minADE, minFDE, hit)` with `hit = minFDE <= tau`.
pub fn min_errors(pred: &TrajectoryModeSet, gt: &Trajectory, tau: f64) -> Result<(f64, f64, bool)> {
    if pred.modes.is_empty() {
        return Err(Error::invalid("prediction has no modes"));
    }
    let mut ade = f64::INFINITY;
    let mut fde = f64::INFINITY;
    for m in &pred.modes {
        let (a, f) = displacement_errors(m, gt)?;
        ade = ade.min(a);
        fde = fde.min(f);
    }
    Ok((ade, fde, fde <= tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TypeCounters {
    pub sum_min_ade: f64,
    pub sum_min_fde: f64,
    pub matched: u64,
    pub misses: u64,
    pub hits: u64,
    pub false_positives: u64,
    pub n_gt: u64,
}

impl TypeCounters {
    fn merge(&mut self, o: &TypeCounters) {
        self.sum_min_ade += o.sum_min_ade;
        self.sum_min_fde += o.sum_min_fde;
        self.matched += o.matched;
        self.misses += o.misses;
        self.hits += o.hits;
        self.false_positives += o.false_positives;
        self.n_gt += o.n_gt;
    }
}

/// Accumulated counters. A report without `config` is the merge identity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: Option<MetricConfig>,
    pub vehicle: TypeCounters,
    pub pedestrian: TypeCounters,
    pub steps: u64,
}

impl MetricReport {
    pub fn empty(config: MetricConfig) -> Self {
        Self { config: Some(config), ..Self::default() }
    }

    pub fn counters(&self, t: AgentType) -> &TypeCounters {
        match t {
            AgentType::Vehicle => &self.vehicle,
            AgentType::Pedestrian => &self.pedestrian,
        }
    }

    fn counters_mut(&mut self, t: AgentType) -> &mut TypeCounters {
        match t {
            AgentType::Vehicle => &mut self.vehicle,
            AgentType::Pedestrian => &mut self.pedestrian,
        }
    }
}

/// Error of one matched ground-truth agent with a full future.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentError {
    pub gt_track: TrackId,
    pub pred_track: TrackId,
    pub agent_type: AgentType,
    pub min_ade: f64,
    pub min_fde: f64,
    pub hit: bool,
}

/// Matching outcome of one step before it is folded into counters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepMatches {
    pub errors: Vec<AgentError>,
    /// Unmatched predictions per type, indexed by `AgentType::index`.
    pub false_positives: [u64; 2],
    pub n_gt: [u64; 2],
}

/// Matches predictions to ground truth within each agent type. Ground truth
/// without a full future can absorb a prediction but is not scored.
pub fn match_step(preds: &[PredictedAgent], gts: &[GroundTruthFuture], cfg: &MetricConfig) -> Result<StepMatches> {
    let mut out = StepMatches::default();
    for t in AgentType::ALL {
        let p: Vec<&PredictedAgent> = preds.iter().filter(|a| a.agent_type == t).collect();
        let g: Vec<&GroundTruthFuture> = gts.iter().filter(|a| a.agent_type == t).collect();
        for a in &p {
            if a.modes.k() > cfg.k {
                return Err(Error::invalid(format!("prediction has {} modes, K is {}", a.modes.k(), cfg.k)));
            }
        }
        let pp: Vec<Point2> = p.iter().map(|a| a.position).collect();
        let gp: Vec<Point2> = g.iter().map(|a| a.position).collect();
        let m = epa_match(&pp, &gp, cfg.tau_epa)?;
        out.false_positives[t.index()] = (p.len() - m.pairs.len()) as u64;
        out.n_gt[t.index()] = g.iter().filter(|a| a.future.is_some()).count() as u64;
        for &(i, j) in &m.pairs {
            let Some(future) = &g[j].future else { continue };
            if future.len() != cfg.t_future {
                return Err(Error::invalid("ground-truth future does not span T_future"));
            }
            let (min_ade, min_fde, hit) = min_errors(&p[i].modes, future, cfg.tau_epa)?;
            out.errors.push(AgentError {
                gt_track: g[j].track_id,
                pred_track: p[i].track_id,
                agent_type: t,
                min_ade,
                min_fde,
                hit,
            });
        }
    }
    Ok(out)
}

/// Scores one step.
pub fn evaluate_step(preds: &[PredictedAgent], gts: &[GroundTruthFuture], cfg: &MetricConfig) -> Result<MetricReport> {
    let m = match_step(preds, gts, cfg)?;
    let mut report = MetricReport::empty(*cfg);
    report.steps = 1;
    for t in AgentType::ALL {
        let c = report.counters_mut(t);
        c.false_positives = m.false_positives[t.index()];
        c.n_gt = m.n_gt[t.index()];
    }
    for e in &m.errors {
        let c = report.counters_mut(e.agent_type);
        c.sum_min_ade += e.min_ade;
        c.sum_min_fde += e.min_fde;
        c.matched += 1;
        c.misses += (e.min_fde > cfg.miss_threshold) as u64;
        c.hits += e.hit as u64;
    }
    Ok(report)
}

/// Sums counters. Reports from different configurations cannot be mixed.
pub fn aggregate(a: &MetricReport, b: &MetricReport) -> Result<MetricReport> {
    let config = match (a.config, b.config) {
        (Some(x), Some(y)) if x != y => {
            return Err(Error::invalid("cannot aggregate reports from different metric configurations"));
        }
        (x, y) => x.or(y),
    };
    let mut out = a.clone();
    out.config = config;
    out.vehicle.merge(&b.vehicle);
    out.pedestrian.merge(&b.pedestrian);
    out.steps += b.steps;
    Ok(out)
}

pub fn aggregate_all<'a>(reports: impl IntoIterator<Item = &'a MetricReport>) -> Result<MetricReport> {
    reports.into_iter().try_fold(MetricReport::default(), |acc, r| aggregate(&acc, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpaSummary {
    /// Indexed by [`AgentType::index`]; `None` when the type has no ground truth.
    pub per_type: [Option<f64>; 2],
    pub mean: Option<f64>,
    /// False positives of types without any ground truth.
    pub unscored_false_positives: u64,
}

/// `(hits - alpha * FP) / N_GT` per type, averaged over types with `N_GT > 0`.
pub fn epa(report: &MetricReport, alpha: f64) -> EpaSummary {
    let mut per_type = [None; 2];
    let mut unscored = 0;
    for t in AgentType::ALL {
        let c = report.counters(t);
        if c.n_gt > 0 {
            per_type[t.index()] = Some((c.hits as f64 - alpha * c.false_positives as f64) / c.n_gt as f64);
        } else {
            unscored += c.false_positives;
        }
    }
    let scored: Vec<f64> = per_type.iter().flatten().copied().collect();
    let mean = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    EpaSummary { per_type, mean, unscored_false_positives: unscored }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub min_ade: Option<f64>,
    pub min_fde: Option<f64>,
    pub miss_rate: Option<f64>,
    pub epa: Option<f64>,
    pub matched: u64,
    pub hits: u64,
    pub false_positives: u64,
    pub n_gt: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub min_ade: Option<f64>,
    pub min_fde: Option<f64>,
    pub miss_rate: Option<f64>,
    pub epa: Option<f64>,
    pub vehicle: TypeMetrics,
    pub pedestrian: TypeMetrics,
    pub steps: u64,
}

fn ratio(num: f64, den: u64) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

/// Averages over matched ground truth; EPA per [`epa`].
pub fn finalize(report: &MetricReport) -> FinalMetrics {
    let alpha = report.config.unwrap_or_default().alpha;
    let e = epa(report, alpha);
    let per = |t: AgentType| {
        let c = report.counters(t);
        TypeMetrics {
            min_ade: ratio(c.sum_min_ade, c.matched),
            min_fde: ratio(c.sum_min_fde, c.matched),
            miss_rate: ratio(c.misses as f64, c.matched),
            epa: e.per_type[t.index()],
            matched: c.matched,
            hits: c.hits,
            false_positives: c.false_positives,
            n_gt: c.n_gt,
        }
    };
    let (v, p) = (&report.vehicle, &report.pedestrian);
    let matched = v.matched + p.matched;
    FinalMetrics {
        min_ade: ratio(v.sum_min_ade + p.sum_min_ade, matched),
        min_fde: ratio(v.sum_min_fde + p.sum_min_fde, matched),
        miss_rate: ratio((v.misses + p.misses) as f64, matched),
        epa: e.mean,
        vehicle: per(AgentType::Vehicle),
        pedestrian: per(AgentType::Pedestrian),
        steps: report.steps,
    }
}
