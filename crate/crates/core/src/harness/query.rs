//! The query-centric pipeline: sampled features update agent queries by
//! cross attention, supervision drives their lifecycle, the memory bank and
//! map refine tracked queries, and a decoder predicts their futures.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::config::{DecoderKind, PipelineConfig};
use super::detection::{detect, visible_cameras};
use super::pipeline::{check_order, AgentTrace, DecoderIntermediates, Pipeline, StepOutput};
use crate::assignment::{
    supervise_queries, supervision_losses, BoxParams, DetectionOutput, GtObject, SupervisionAssignment,
};
use crate::decoders::{
    decode_readout, goal_decode, heatmap_decode, query_head, regression_decode, view_frame, GoalDecoderParams,
    OracleParams, QueryReadout, RegressionDecoder,
};
use crate::error::{Error, Result};
use crate::geometry::{velocity_heading, CameraModel, Direction, FrameTransform, Point2, Point3};
use crate::map_encoding::{encode_polylines, fuse_map, MapEncoderParams, MapFeatureSet};
use crate::math;
use crate::metrics::PredictedAgent;
use crate::query_bank::{
    cross_attention_update, lifecycle_step, stack_rows, temporal_bank_attention, AgentQuery, AttentionParams,
    Lifecycle, QueryState,
};
use crate::scenario::{
    feature_oracle, AgentType, BoxSize, FeatureOracleParams, FrameObservation, Intent, Scene, SemanticState,
    FRAME_PERIOD,
};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPipeline {
    pub config: PipelineConfig,
    pub features: FeatureOracleParams,
    pub cross: AttentionParams,
    pub temporal: AttentionParams,
    pub map_attention: AttentionParams,
    pub map_encoder: MapEncoderParams,
    pub oracle: OracleParams,
    pub regression: RegressionDecoder,
    pub goal: GoalDecoderParams,
    pub cameras: Vec<CameraModel>,
    /// Token attended to when a query samples no agent feature.
    pub background: DVector<f64>,
}

/// Last known global motion of a tracked query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackMotion {
    pub position: Point2,
    pub velocity: Point2,
    pub heading: f64,
    pub agent_type: AgentType,
    pub size: BoxSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPipelineState {
    pub queries: QueryState,
    pub supervision: SupervisionAssignment,
    pub motion: Vec<Option<TrackMotion>>,
    pub map: MapFeatureSet,
    pub last_frame: Option<u32>,
    pub last_timestamp: Option<f64>,
}

struct SampledFeature {
    ego_position: Point2,
    cameras: Vec<usize>,
    feature: DVector<f64>,
}

impl QueryPipeline {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let c = config;
        let seed = c.seed;
        let features = FeatureOracleParams::new(c.d_h, c.feature_sigma, math::derive_seed(seed, &[1]))?;
        let cross = AttentionParams::seeded(c.d_h, c.d_k, math::derive_seed(seed, &[2]))?;
        let temporal = AttentionParams::seeded(c.d_h, c.d_h, math::derive_seed(seed, &[3]))?;
        let map_attention = AttentionParams::seeded(c.d_h, c.d_k, math::derive_seed(seed, &[4]))?;
        let map_encoder = MapEncoderParams::seeded(c.d_h, math::derive_seed(seed, &[5]));
        let dcfg = c.decoder_config();
        let oracle = OracleParams::new(&features, &cross, c.manoeuvre_model(), &dcfg, c.residual_threshold)?;
        let regression = RegressionDecoder::seeded(c.d_h, &dcfg, math::derive_seed(seed, &[6]));
        let goal = GoalDecoderParams::seeded(c.d_h, &dcfg, math::derive_seed(seed, &[6]));
        let background = math::uniform_vector(&mut math::rng_from(math::derive_seed(seed, &[8])), c.d_h, 1.0);
        Ok(Self {
            config: config.clone(),
            features,
            cross,
            temporal,
            map_attention,
            map_encoder,
            oracle,
            regression,
            goal,
            cameras: CameraModel::surround_rig(),
            background,
        })
    }

    fn query_seed(&self) -> u64 {
        math::derive_seed(self.config.seed, &[7])
    }

    /// Features of all detections in the frame, one per agent.
    fn frame_features(&self, frame: &FrameObservation) -> Result<Vec<SampledFeature>> {
        let dets = detect(frame, &self.cameras, &self.config)?;
        let mut out = Vec::with_capacity(dets.len());
        for d in dets {
            let pose = &frame.ego_pose;
            let state = SemanticState {
                position: pose.to_local(d.position),
                velocity: pose.vector_to_local(d.state.velocity),
                intent: d.state.intent,
                agent_type: d.agent_type,
                size: d.state.size,
            };
            let mut rng = math::rng_from(math::derive_seed(
                self.config.seed,
                &[0xFEA7, frame.index as u64, d.track_id.0 as u64],
            ));
            out.push(SampledFeature {
                ego_position: state.position,
                cameras: d.cameras,
                feature: feature_oracle(&state, &self.features, &mut rng)?,
            });
        }
        Ok(out)
    }

    /// For every camera that sees the reference point, the nearest agent in
    /// that camera within the sampling radius.
    fn sample(&self, reference: Point3, feats: &[SampledFeature]) -> Result<DMatrix<f64>> {
        let mut picked: Vec<usize> = Vec::new();
        for cam in visible_cameras(reference, &self.cameras)? {
            let mut best: Option<(usize, f64)> = None;
            for (i, f) in feats.iter().enumerate() {
                if !f.cameras.contains(&cam) {
                    continue;
                }
                let d = f.ego_position.distance(reference.xy());
                if d <= self.config.sampling_radius && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            if let Some((i, _)) = best {
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
        }
        let rows: Vec<DVector<f64>> = if picked.is_empty() {
            vec![self.background.clone()]
        } else {
            picked.iter().map(|&i| feats[i].feature.clone()).collect()
        };
        Ok(stack_rows(&rows, self.config.d_h))
    }

    /// Cross attention of one query at `reference`: `(updated latent, readout)`.
    fn attend(&self, latent: &DVector<f64>, reference: Point3, feats: &[SampledFeature]) -> Result<(DVector<f64>, DVector<f64>)> {
        let kv = self.sample(reference, feats)?;
        let q = DMatrix::from_row_slice(1, self.config.d_h, latent.as_slice());
        let out = cross_attention_update(&q, &kv, &self.cross)?;
        Ok((out.queries.row(0).transpose(), out.evidence.row(0).transpose()))
    }

    fn reference_for(&self, q: &AgentQuery, motion: Option<&TrackMotion>, frame: &FrameObservation, dt: f64) -> Point3 {
        match (q.lifecycle, motion) {
            (Lifecycle::Tracked(_), Some(m)) => {
                let p = frame.ego_pose.to_local(m.position + m.velocity * dt);
                Point3::new(p.x, p.y, m.size.height / 2.0)
            }
            _ => q.reference,
        }
    }

    fn decode(
        &self,
        latent: &DVector<f64>,
        readout: QueryReadout,
        heading_fallback: f64,
        frame: &FrameObservation,
        track: crate::scenario::TrackId,
    ) -> Result<(crate::decoders::TrajectoryModeSet, FrameTransform, DecoderIntermediates, bool)> {
        let view = self.config.view;
        if self.config.decoder == DecoderKind::Oracle {
            let out = decode_readout(readout, &self.oracle, view, heading_fallback)?;
            return Ok((out.modes, out.view_frame, DecoderIntermediates::None, out.fallback));
        }
        let frame_t = view_frame(&readout.state, view, heading_fallback);
        let fallback = readout.fallback;
        let (modes, inter) = match self.config.decoder {
            DecoderKind::Regression => (regression_decode(latent, &self.regression)?, DecoderIntermediates::None),
            DecoderKind::Goal => {
                let mut rng = math::rng_from(math::derive_seed(
                    self.config.seed,
                    &[0x60A1D, frame.index as u64, track.0 as u64],
                ));
                let (m, i) = goal_decode(latent, readout.state.velocity.norm(), &mut rng, &self.goal)?;
                (m, DecoderIntermediates::Goal(i))
            }
            DecoderKind::Heatmap => {
                let out = heatmap_decode(latent, &self.goal)?;
                (out.modes, DecoderIntermediates::Heatmap { heatmap: out.heatmap, completion: out.completion })
            }
            DecoderKind::Oracle => unreachable!(),
        };
        Ok((modes, frame_t, inter, fallback))
    }
}

fn gt_objects(frame: &FrameObservation) -> Vec<GtObject> {
    let pose = &frame.ego_pose;
    frame
        .agents
        .iter()
        .map(|a| {
            let p = pose.to_local(a.state.position);
            GtObject {
                track_id: a.track_id,
                agent_type: a.agent_type,
                bbox: BoxParams {
                    center: Point3::new(p.x, p.y, a.state.size.height / 2.0),
                    size: a.state.size,
                    yaw: pose.heading_to_local(a.state.heading),
                    velocity: pose.vector_to_local(a.state.velocity),
                },
            }
        })
        .collect()
}

/// Readout substituted for a tracked query whose fit failed: its last
/// motion carried forward with no intent.
fn carried_readout(mut r: QueryReadout, m: &TrackMotion, frame: &FrameObservation, dt: f64) -> QueryReadout {
    let pose = &frame.ego_pose;
    r.state = SemanticState {
        position: pose.to_local(m.position + m.velocity * dt),
        velocity: pose.vector_to_local(m.velocity),
        intent: Intent::None,
        agent_type: m.agent_type,
        size: m.size,
    };
    r
}

impl Pipeline for QueryPipeline {
    type State = QueryPipelineState;

    fn init(&self, scene: &Scene) -> Result<QueryPipelineState> {
        let c = &self.config;
        Ok(QueryPipelineState {
            queries: QueryState::new(c.n_query, c.d_h, c.s_bank, self.query_seed()),
            supervision: SupervisionAssignment::empty(c.n_query),
            motion: vec![None; c.n_query],
            map: encode_polylines(&scene.map, &self.map_encoder),
            last_frame: None,
            last_timestamp: None,
        })
    }

    fn step(&self, state: &mut QueryPipelineState, frame: &FrameObservation) -> Result<StepOutput> {
        check_order(state.last_frame, frame)?;
        let dt = state.last_timestamp.map_or(FRAME_PERIOD, |t| frame.timestamp - t);
        let feats = self.frame_features(frame)?;
        let n = state.queries.queries.len();

        let mut latents = Vec::with_capacity(n);
        let mut readouts = Vec::with_capacity(n);
        for (i, q) in state.queries.queries.iter().enumerate() {
            let reference = self.reference_for(q, state.motion[i].as_ref(), frame, dt);
            let (latent, evidence) = self.attend(&q.feature, reference, &feats)?;
            latents.push(latent);
            readouts.push(query_head(&evidence, &self.oracle)?);
        }
        let decoded: Vec<DetectionOutput> = readouts.iter().map(|r| r.detection).collect();
        let gts = gt_objects(frame);
        let supervision = supervise_queries(&state.supervision, &decoded, &gts, &self.config.box_cost())?;
        let losses = supervision_losses(&supervision, &decoded, &self.config.box_cost())?;
        let mut next = lifecycle_step(&state.queries, &supervision, self.query_seed())?;

        for i in 0..n {
            let s = &supervision.queries[i];
            if s.reinit {
                state.motion[i] = None;
            } else if s.newly_matched {
                state.motion[i] = None;
                let q = &next.queries[i];
                let (latent, evidence) = self.attend(&q.feature, q.reference, &feats)?;
                latents[i] = latent;
                readouts[i] = query_head(&evidence, &self.oracle)?;
            }
        }

        let mut out = StepOutput { supervision_losses: Some(losses), ..StepOutput::default() };
        let mut tracked: Vec<usize> = Vec::new();
        for (i, q) in next.queries.iter_mut().enumerate() {
            if q.track().is_some() {
                q.feature = latents[i].clone();
                tracked.push(i);
            }
        }
        for &i in &tracked {
            let updated = temporal_bank_attention(&next.queries[i], &next.bank, &self.temporal)?;
            let id = updated.track().ok_or_else(|| Error::Consistency("tracked query lost its id".into()))?;
            next.bank.push(id, updated.feature.clone());
            next.queries[i] = updated;
        }
        let rows: Vec<DVector<f64>> = tracked.iter().map(|&i| next.queries[i].feature.clone()).collect();
        let fused = fuse_map(&stack_rows(&rows, self.config.d_h), &state.map, &self.map_attention)?;

        let pose = frame.ego_pose;
        for (row, &i) in tracked.iter().enumerate() {
            let id = next.queries[i].track().expect("tracked");
            let mut readout = readouts[i].clone();
            if readout.fallback {
                if let Some(m) = &state.motion[i] {
                    readout = carried_readout(readout, m, frame, dt);
                }
            }
            let prev_heading = state.motion[i].map_or(0.0, |m| pose.heading_to_local(m.heading));
            let latent: DVector<f64> = fused.row(row).transpose();
            let (modes_view, vf, inter, fallback) = self.decode(&latent, readout.clone(), prev_heading, frame, id)?;
            let modes = modes_view
                .transform(&vf, Direction::Inverse)?
                .transform(&pose, Direction::Inverse)?;
            let st = &readout.state;
            let position = pose.to_global(st.position);
            let velocity = pose.vector_to_global(st.velocity);
            let heading = velocity_heading(velocity, state.motion[i].map_or(0.0, |m| m.heading));
            state.motion[i] = Some(TrackMotion {
                position,
                velocity,
                heading,
                agent_type: st.agent_type,
                size: st.size,
            });
            out.agents.push(PredictedAgent { track_id: id, agent_type: st.agent_type, position, modes });
            out.traces.push(AgentTrace {
                gt_track: supervision.queries[i].track(),
                view_frame: vf,
                ego_pose: pose,
                modes_view,
                intermediates: inter,
                fallback,
            });
        }
        for q in &mut next.queries {
            q.age += 1;
        }
        state.queries = next;
        state.supervision = supervision;
        state.last_frame = Some(frame.index);
        state.last_timestamp = Some(frame.timestamp);
        Ok(out)
    }
}
