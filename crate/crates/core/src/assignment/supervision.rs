//! Query supervision: keeping matched queries on their agents, releasing
//! queries whose agent disappeared, and matching empty queries to new agents
//! with the set-prediction cost `-p(c) + L1(box)`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::hungarian::{hungarian, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::math;
use crate::scenario::{AgentType, BoxSize, TrackId};

/// Class distribution over `{vehicle, pedestrian, empty}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbs {
    pub vehicle: f64,
    pub pedestrian: f64,
    pub empty: f64,
}

impl ClassProbs {
    pub fn prob(&self, class: Option<AgentType>) -> f64 {
        match class {
            Some(AgentType::Vehicle) => self.vehicle,
            Some(AgentType::Pedestrian) => self.pedestrian,
            None => self.empty,
        }
    }

    pub fn check(&self) -> Result<()> {
        let s = self.vehicle + self.pedestrian + self.empty;
        let ok = [self.vehicle, self.pedestrian, self.empty]
            .iter()
            .all(|p| (0.0..=1.0).contains(p));
        if !ok || (s - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("class probabilities must sum to 1, got {s}")));
        }
        Ok(())
    }

    /// Most likely object class, ignoring the empty class.
    pub fn object_class(&self) -> AgentType {
        if self.vehicle >= self.pedestrian {
            AgentType::Vehicle
        } else {
            AgentType::Pedestrian
        }
    }
}

/// Box parameterisation. `yaw` and `velocity` only enter the box loss when
/// enabled in [`BoxCostConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxParams {
    pub center: Point3,
    pub size: BoxSize,
    pub yaw: f64,
    pub velocity: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxCostConfig {
    pub include_yaw: bool,
    pub include_velocity: bool,
}

impl BoxParams {
    /// L1 distance over `(x, y, z, l, w, h)` plus optional terms.
    pub fn l1(&self, other: &BoxParams, cfg: &BoxCostConfig) -> f64 {
        let (a, b) = (self, other);
        let mut d = (a.center.x - b.center.x).abs()
            + (a.center.y - b.center.y).abs()
            + (a.center.z - b.center.z).abs()
            + (a.size.length - b.size.length).abs()
            + (a.size.width - b.size.width).abs()
            + (a.size.height - b.size.height).abs();
        if cfg.include_yaw {
            d += math::wrap_angle(a.yaw - b.yaw).abs();
        }
        if cfg.include_velocity {
            d += (a.velocity.x - b.velocity.x).abs() + (a.velocity.y - b.velocity.y).abs();
        }
        d
    }
}

/// Per-query output of the query decoding head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutput {
    pub probs: ClassProbs,
    pub bbox: BoxParams,
}

/// A ground-truth agent present in the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtObject {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    pub bbox: BoxParams,
}

/// `-p(c) + L1(b, b_hat)` for an object target, `0` for the empty class.
pub fn detr_match_cost(
    pred: &DetectionOutput,
    target_class: Option<AgentType>,
    target_box: &BoxParams,
    cfg: &BoxCostConfig,
) -> Result<f64> {
    pred.probs.check()?;
    Ok(match target_class {
        Some(c) => -pred.probs.prob(Some(c)) + target_box.l1(&pred.bbox, cfg),
        None => 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryLabel {
    Matched(TrackId),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySupervision {
    pub label: QueryLabel,
    /// The query's agent disappeared; reset it before reuse.
    pub reinit: bool,
    /// Matched to a newly appeared agent in this frame.
    pub newly_matched: bool,
    pub target: Option<GtObject>,
}

impl QuerySupervision {
    pub const EMPTY: QuerySupervision = QuerySupervision {
        label: QueryLabel::Empty,
        reinit: false,
        newly_matched: false,
        target: None,
    };

    pub fn track(&self) -> Option<TrackId> {
        match self.label {
            QueryLabel::Matched(id) => Some(id),
            QueryLabel::Empty => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionAssignment {
    pub queries: Vec<QuerySupervision>,
    /// New agents left without a query this frame.
    pub unassigned: Vec<TrackId>,
}

impl SupervisionAssignment {
    pub fn empty(n_queries: usize) -> Self {
        Self {
            queries: alloc::vec![QuerySupervision::EMPTY; n_queries],
            unassigned: Vec::new(),
        }
    }

    pub fn query_for(&self, id: TrackId) -> Option<usize> {
        self.queries.iter().position(|q| q.label == QueryLabel::Matched(id))
    }
}

/// One frame of the three-case supervision protocol.
///
/// Queries released in this frame (`reinit`) are not offered to the
/// bipartite matching until the next frame.
pub fn supervise_queries(
    prev: &SupervisionAssignment,
    decoded: &[DetectionOutput],
    gt: &[GtObject],
    cfg: &BoxCostConfig,
) -> Result<SupervisionAssignment> {
    if decoded.len() != prev.queries.len() {
        return Err(Error::invalid(format!(
            "{} decoded outputs for {} queries",
            decoded.len(),
            prev.queries.len()
        )));
    }
    let mut seen: Vec<TrackId> = Vec::new();
    for q in &prev.queries {
        if let Some(id) = q.track() {
            if seen.contains(&id) {
                return Err(Error::Consistency(format!("track {} carried by two queries", id.0)));
            }
            seen.push(id);
        }
    }
    let gt_by_id = |id: TrackId| gt.iter().find(|g| g.track_id == id).copied();

    let mut queries = Vec::with_capacity(prev.queries.len());
    let mut carried: Vec<TrackId> = Vec::new();
    for q in &prev.queries {
        queries.push(match q.track() {
            Some(id) => match gt_by_id(id) {
                Some(obj) => {
                    carried.push(id);
                    QuerySupervision {
                        label: QueryLabel::Matched(id),
                        reinit: false,
                        newly_matched: false,
                        target: Some(obj),
                    }
                }
                None => QuerySupervision { reinit: true, ..QuerySupervision::EMPTY },
            },
            None => QuerySupervision::EMPTY,
        });
    }

    let free: Vec<usize> = prev
        .queries
        .iter()
        .enumerate()
        .filter(|(_, q)| q.track().is_none())
        .map(|(i, _)| i)
        .collect();
    let new_agents: Vec<GtObject> = gt.iter().filter(|g| !carried.contains(&g.track_id)).copied().collect();

    let mut cells = Vec::with_capacity(free.len() * new_agents.len());
    for &qi in &free {
        for g in &new_agents {
            cells.push(detr_match_cost(&decoded[qi], Some(g.agent_type), &g.bbox, cfg)?);
        }
    }
    let matrix = CostMatrix::new(free.len(), new_agents.len(), cells)?;
    let result = hungarian(&matrix)?;
    for &(row, col) in &result.pairs {
        let obj = new_agents[col];
        queries[free[row]] = QuerySupervision {
            label: QueryLabel::Matched(obj.track_id),
            reinit: false,
            newly_matched: true,
            target: Some(obj),
        };
    }
    let unassigned = result.unmatched_cols.iter().map(|&c| new_agents[c].track_id).collect();
    Ok(SupervisionAssignment { queries, unassigned })
}

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// `(L_cls, L_coord)` summed over all queries.
pub fn supervision_losses(
    assignment: &SupervisionAssignment,
    decoded: &[DetectionOutput],
    cfg: &BoxCostConfig,
) -> Result<(f64, f64)> {
    if decoded.len() < assignment.queries.len() {
        return Err(Error::invalid("missing decoded output for an assigned query"));
    }
    let mut cls = 0.0;
    let mut coord = 0.0;
    for (q, out) in assignment.queries.iter().zip(decoded) {
        let class = q.target.map(|t| t.agent_type);
        let class = if q.track().is_some() { class } else { None };
        cls += -math::ln(out.probs.prob(class).max(LOG_FLOOR));
        if let (Some(_), Some(t)) = (q.track(), q.target) {
            coord += t.bbox.l1(&out.bbox, cfg);
        }
    }
    Ok((cls, coord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn bx(x: f64, y: f64) -> BoxParams {
        BoxParams {
            center: Point3::new(x, y, 0.8),
            size: BoxSize { length: 4.5, width: 1.9, height: 1.6 },
            yaw: 0.0,
            velocity: Point2::ZERO,
        }
    }

    fn det(p_veh: f64, b: BoxParams) -> DetectionOutput {
        DetectionOutput {
            probs: ClassProbs { vehicle: p_veh, pedestrian: 0.0, empty: 1.0 - p_veh },
            bbox: b,
        }
    }

    fn gt(id: u32, b: BoxParams) -> GtObject {
        GtObject { track_id: TrackId(id), agent_type: AgentType::Vehicle, bbox: b }
    }

    #[test]
    fn match_cost_cases() {
        let cfg = BoxCostConfig::default();
        let b = bx(1.0, 2.0);
        assert_eq!(detr_match_cost(&det(1.0, b), Some(AgentType::Vehicle), &b, &cfg).unwrap(), -1.0);
        assert_eq!(detr_match_cost(&det(0.3, bx(9.0, 9.0)), None, &b, &cfg).unwrap(), 0.0);
        let mut off = b;
        off.center = Point3::new(1.5, 2.5, 1.3);
        off.size = BoxSize { length: 5.0, width: 2.4, height: 2.1 };
        let c = detr_match_cost(&det(0.6, off), Some(AgentType::Vehicle), &b, &cfg).unwrap();
        assert!((c - 2.4).abs() < 1e-12);
        let bad = DetectionOutput {
            probs: ClassProbs { vehicle: 0.6, pedestrian: 0.6, empty: 0.0 },
            bbox: b,
        };
        assert!(detr_match_cost(&bad, Some(AgentType::Vehicle), &b, &cfg).is_err());
    }

    #[test]
    fn yaw_and_velocity_flags() {
        let a = bx(0.0, 0.0);
        let mut b = a;
        b.yaw = 0.5;
        b.velocity = Point2::new(1.0, -1.0);
        assert_eq!(a.l1(&b, &BoxCostConfig::default()), 0.0);
        let all = BoxCostConfig { include_yaw: true, include_velocity: true };
        assert!((a.l1(&b, &all) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn persistence_and_disappearance() {
        let cfg = BoxCostConfig::default();
        let mut prev = SupervisionAssignment::empty(2);
        prev.queries[1].label = QueryLabel::Matched(TrackId(7));
        let decoded = vec![det(0.0, bx(50.0, 50.0)), det(1.0, bx(0.0, 0.0))];
        let s = supervise_queries(&prev, &decoded, &[gt(7, bx(0.0, 0.0))], &cfg).unwrap();
        assert_eq!(s.queries[1].label, QueryLabel::Matched(TrackId(7)));
        assert!(!s.queries[1].newly_matched);
        assert_eq!(s.queries[0].label, QueryLabel::Empty);

        let s2 = supervise_queries(&s, &decoded, &[], &cfg).unwrap();
        assert_eq!(s2.queries[1].label, QueryLabel::Empty);
        assert!(s2.queries[1].reinit);
    }

    #[test]
    fn duplicate_track_is_inconsistent() {
        let mut prev = SupervisionAssignment::empty(2);
        prev.queries[0].label = QueryLabel::Matched(TrackId(1));
        prev.queries[1].label = QueryLabel::Matched(TrackId(1));
        let decoded = vec![det(1.0, bx(0.0, 0.0)); 2];
        assert!(matches!(
            supervise_queries(&prev, &decoded, &[], &BoxCostConfig::default()),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn leftover_agents_unassigned() {
        let prev = SupervisionAssignment::empty(1);
        let decoded = vec![det(1.0, bx(0.0, 0.0))];
        let s = supervise_queries(&prev, &decoded, &[gt(1, bx(10.0, 0.0)), gt(2, bx(0.0, 0.0))], &BoxCostConfig::default())
            .unwrap();
        assert_eq!(s.queries[0].label, QueryLabel::Matched(TrackId(2)));
        assert_eq!(s.unassigned, vec![TrackId(1)]);
    }

    #[test]
    fn losses_perfect_and_single_term() {
        let cfg = BoxCostConfig::default();
        let mut a = SupervisionAssignment::empty(2);
        a.queries[0] = QuerySupervision {
            label: QueryLabel::Matched(TrackId(3)),
            reinit: false,
            newly_matched: false,
            target: Some(gt(3, bx(1.0, 1.0))),
        };
        let perfect = vec![det(1.0, bx(1.0, 1.0)), det(0.0, bx(0.0, 0.0))];
        assert_eq!(supervision_losses(&a, &perfect, &cfg).unwrap(), (0.0, 0.0));
        let half = vec![det(1.0, bx(1.0, 1.0)), det(0.5, bx(0.0, 0.0))];
        let (cls, coord) = supervision_losses(&a, &half, &cfg).unwrap();
        assert!((cls - 2f64.ln()).abs() < 1e-15);
        assert_eq!(coord, 0.0);
        assert!(supervision_losses(&a, &perfect[..1], &cfg).is_err());
    }
}
