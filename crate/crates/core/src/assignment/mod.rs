//! Min-cost bipartite matching and the per-frame query supervision built on
//! top of it.

mod hungarian;
mod supervision;

pub use hungarian::{hungarian, CostMatrix, MatchResult};
pub use supervision::{
    detr_match_cost, supervise_queries, supervision_losses, BoxCostConfig, BoxParams, ClassProbs,
    DetectionOutput, GtObject, QueryLabel, QuerySupervision, SupervisionAssignment,
};
