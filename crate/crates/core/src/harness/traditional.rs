//! Tracking-by-detection baseline: constant-velocity Kalman tracks
//! associated by gated Hungarian matching, and a predictor that sees only
//! the tracked trajectory.

use alloc::vec::Vec;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use super::config::PipelineConfig;
use super::detection::detect;
use super::pipeline::{check_order, Pipeline, StepOutput};
use crate::assignment::{hungarian, CostMatrix};
use crate::decoders::TrajectoryModeSet;
use crate::error::Result;
use crate::geometry::{CameraModel, FrameTag, Point2, Trajectory};
use crate::math;
use crate::metrics::PredictedAgent;
use crate::query_bank::softmax;
use crate::scenario::{AgentType, FrameObservation, Scene, TrackId, FRAME_PERIOD};

/// Prior velocity variance of a newborn track, (m/s)^2.
pub const BIRTH_VELOCITY_VARIANCE: f64 = 100.0;
/// Heading perturbations of the predictor's modes, degrees.
pub const HEADING_PERTURBATIONS: [f64; 5] = [0.0, 10.0, -10.0, 20.0, -20.0];
/// How many past positions the mode scoring looks at.
const FIT_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrack {
    /// `(x, y, vx, vy)`, global frame.
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub track_id: TrackId,
    pub agent_type: AgentType,
    pub misses: u32,
    pub age: u32,
    /// Filtered positions, oldest first.
    pub history: Vec<Point2>,
}

impl KalmanTrack {
    pub fn position(&self) -> Point2 {
        Point2::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> Point2 {
        Point2::new(self.state[2], self.state[3])
    }
}

/// Constant-velocity transition and white-acceleration process noise.
pub fn kf_predict(x: &Vector4<f64>, p: &Matrix4<f64>, dt: f64, accel_sd: f64) -> (Vector4<f64>, Matrix4<f64>) {
    let f = Matrix4::new(
        1.0, 0.0, dt, 0.0, //
        0.0, 1.0, 0.0, dt, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let q = accel_sd * accel_sd;
    let (a, b, c) = (dt * dt * dt * dt / 4.0 * q, dt * dt * dt / 2.0 * q, dt * dt * q);
    let qm = Matrix4::new(
        a, 0.0, b, 0.0, //
        0.0, a, 0.0, b, //
        b, 0.0, c, 0.0, //
        0.0, b, 0.0, c,
    );
    let p2 = f * p * f.transpose() + qm;
    (f * x, (p2 + p2.transpose()) * 0.5)
}

/// Position measurement update in Joseph form.
pub fn kf_update(x: &Vector4<f64>, p: &Matrix4<f64>, z: Point2, meas_sd: f64) -> (Vector4<f64>, Matrix4<f64>) {
    let h = Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0,
    );
    let r = Matrix2::identity() * (meas_sd * meas_sd);
    let s = h * p * h.transpose() + r;
    let s_inv = s.try_inverse().unwrap_or_else(Matrix2::zeros);
    let k = p * h.transpose() * s_inv;
    let innov = Vector2::new(z.x, z.y) - h * x;
    let ikh = Matrix4::identity() - k * h;
    let p2 = ikh * p * ikh.transpose() + k * r * k.transpose();
    (x + k * innov, (p2 + p2.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraditionalState {
    pub tracks: Vec<KalmanTrack>,
    pub next_track_id: u32,
    pub last_frame: Option<u32>,
    pub last_timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraditionalPipeline {
    pub config: PipelineConfig,
    pub cameras: Vec<CameraModel>,
}

impl TraditionalPipeline {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config: config.clone(), cameras: CameraModel::surround_rig() })
    }
}

/// State from the first two detections: position `z1`, velocity by finite
/// difference, with the matching measurement covariance.
pub fn two_point_init(z0: Point2, z1: Point2, dt: f64, meas_sd: f64) -> (Vector4<f64>, Matrix4<f64>) {
    let v = (z1 - z0) * (1.0 / dt);
    let r = meas_sd * meas_sd;
    let mut p = Matrix4::zeros();
    for (pi, vi) in [(0, 2), (1, 3)] {
        p[(pi, pi)] = r;
        p[(pi, vi)] = r / dt;
        p[(vi, pi)] = r / dt;
        p[(vi, vi)] = 2.0 * r / (dt * dt);
    }
    (Vector4::new(z1.x, z1.y, v.x, v.y), p)
}

/// `K` constant-velocity extrapolations (heading perturbations, then a
/// stop mode), scored by how well each explains the recent track history
/// with weights halving per step into the past.
pub fn predict_modes(track: &KalmanTrack, k: usize, t_future: usize, dt: f64) -> Result<TrajectoryModeSet> {
    let p = track.position();
    let v = track.velocity();
    let mut velocities: Vec<Point2> = HEADING_PERTURBATIONS
        .iter()
        .map(|deg| v.rotate(deg * core::f64::consts::PI / 180.0))
        .collect();
    velocities.push(Point2::ZERO);
    let mut extra = 3.0;
    while velocities.len() < k {
        velocities.push(v.rotate(extra * 10.0 * core::f64::consts::PI / 180.0));
        velocities.push(v.rotate(-extra * 10.0 * core::f64::consts::PI / 180.0));
        extra += 1.0;
    }
    velocities.truncate(k);
    let hist = &track.history;
    let fit: Vec<f64> = velocities
        .iter()
        .map(|&vm| {
            let mut err = 0.0;
            for j in 1..=FIT_WINDOW.min(hist.len().saturating_sub(1)) {
                let past = hist[hist.len() - 1 - j];
                let back = p - vm * (j as f64 * dt);
                let w = math::exp(-((j - 1) as f64) * core::f64::consts::LN_2);
                let d = past.distance(back);
                err += w * d * d;
            }
            -err
        })
        .collect();
    let modes = velocities
        .iter()
        .map(|&vm| Trajectory::new((1..=t_future).map(|s| p + vm * (s as f64 * dt)).collect(), FrameTag::Global))
        .collect();
    TrajectoryModeSet::new(modes, softmax(&fit))
}

impl Pipeline for TraditionalPipeline {
    type State = TraditionalState;

    fn init(&self, _scene: &Scene) -> Result<TraditionalState> {
        Ok(TraditionalState::default())
    }

    fn step(&self, state: &mut TraditionalState, frame: &FrameObservation) -> Result<StepOutput> {
        check_order(state.last_frame, frame)?;
        let c = &self.config;
        let dt = state.last_timestamp.map_or(FRAME_PERIOD, |t| frame.timestamp - t);
        for t in &mut state.tracks {
            let (x, p) = kf_predict(&t.state, &t.covariance, dt, c.kf_process_noise);
            t.state = x;
            t.covariance = p;
        }
        let dets = detect(frame, &self.cameras, c)?;
        let cost = CostMatrix::from_fn(state.tracks.len(), dets.len(), |i, j| {
            let t = &state.tracks[i];
            let d = t.position().distance(dets[j].position);
            let gate = if t.history.len() < 2 { c.kf_gate + c.kf_birth_speed * dt } else { c.kf_gate };
            if d <= gate {
                d
            } else {
                f64::INFINITY
            }
        });
        let m = hungarian(&cost)?;
        let mut updated = Vec::new();
        for &(i, j) in &m.pairs {
            let t = &mut state.tracks[i];
            let z = dets[j].position;
            if t.history.len() == 1 {
                (t.state, t.covariance) = two_point_init(t.history[0], z, dt, c.kf_measurement_noise);
            } else {
                let (x, p) = kf_update(&t.state, &t.covariance, z, c.kf_measurement_noise);
                t.state = x;
                t.covariance = p;
            }
            t.misses = 0;
            t.age += 1;
            t.history.push(t.position());
            updated.push(t.track_id);
        }
        for &i in &m.unmatched_rows {
            state.tracks[i].misses += 1;
            state.tracks[i].age += 1;
        }
        state.tracks.retain(|t| t.misses < c.kf_max_misses);
        let r2 = c.kf_measurement_noise * c.kf_measurement_noise;
        for &j in &m.unmatched_cols {
            let d = &dets[j];
            let id = TrackId(state.next_track_id);
            state.next_track_id += 1;
            state.tracks.push(KalmanTrack {
                state: Vector4::new(d.position.x, d.position.y, 0.0, 0.0),
                covariance: Matrix4::from_diagonal(&Vector4::new(r2, r2, BIRTH_VELOCITY_VARIANCE, BIRTH_VELOCITY_VARIANCE)),
                track_id: id,
                agent_type: d.agent_type,
                misses: 0,
                age: 0,
                history: alloc::vec![d.position],
            });
            updated.push(id);
        }
        let mut out = StepOutput::default();
        for t in &state.tracks {
            if updated.contains(&t.track_id) {
                out.agents.push(PredictedAgent {
                    track_id: t.track_id,
                    agent_type: t.agent_type,
                    position: t.position(),
                    modes: predict_modes(t, c.k, c.t_future, FRAME_PERIOD)?,
                });
            }
        }
        state.last_frame = Some(frame.index);
        state.last_timestamp = Some(frame.timestamp);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_kalman_oracle() {
        // x-axis only: the x block evolves independently of y.
        let x = Vector4::new(1.0, 0.0, 2.0, 0.0);
        let p = Matrix4::from_diagonal(&Vector4::new(0.3, 0.3, 0.7, 0.7));
        let (dt, q_sd, r_sd, z) = (0.5, 0.5, 0.2, 2.3);
        let (xp, pp) = kf_predict(&x, &p, dt, q_sd);
        let q = q_sd * q_sd;
        let p00 = 0.3 + dt * dt * 0.7 + dt.powi(4) / 4.0 * q;
        let p01 = dt * 0.7 + dt.powi(3) / 2.0 * q;
        let p11 = 0.7 + dt * dt * q;
        assert!((pp[(0, 0)] - p00).abs() < 1e-12 && (pp[(0, 2)] - p01).abs() < 1e-12 && (pp[(2, 2)] - p11).abs() < 1e-12);
        let (xu, pu) = kf_update(&xp, &pp, Point2::new(z, 0.0), r_sd);
        let r = r_sd * r_sd;
        let s = p00 + r;
        let (k0, k1) = (p00 / s, p01 / s);
        let innov = z - (1.0 + dt * 2.0);
        assert!((xu[0] - (2.0 + k0 * innov)).abs() < 1e-9);
        assert!((xu[2] - (2.0 + k1 * innov)).abs() < 1e-9);
        assert!((pu[(0, 0)] - (1.0 - k0) * p00).abs() < 1e-9);
        assert!((pu[(0, 2)] - (1.0 - k0) * p01).abs() < 1e-9);
        assert!((pu[(2, 2)] - (p11 - k1 * p01)).abs() < 1e-9);
        assert_eq!(xu[1], 0.0);
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let mut x = Vector4::new(0.0, 0.0, 0.0, 0.0);
        let mut p = Matrix4::from_diagonal(&Vector4::new(0.04, 0.04, 100.0, 100.0));
        for k in 0..30 {
            let (a, b) = kf_predict(&x, &p, 0.5, 0.5);
            let (a, b) = kf_update(&a, &b, Point2::new(k as f64, 0.5 * k as f64), 0.2);
            x = a;
            p = b;
            assert!((p - p.transpose()).amax() < 1e-9);
            let eig = p.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > -1e-9));
        }
        assert!((x[2] - 2.0).abs() < 1e-3 && (x[3] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn two_point_init_recovers_velocity() {
        let (x, p) = two_point_init(Point2::new(1.0, 1.0), Point2::new(4.0, -1.0), 0.5, 0.2);
        assert_eq!(x, Vector4::new(4.0, -1.0, 6.0, -4.0));
        assert!((p - p.transpose()).amax() == 0.0);
        assert!(p.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    }

    #[test]
    fn mode_zero_is_cv_extrapolation() {
        let t = KalmanTrack {
            state: Vector4::new(1.0, 2.0, 3.0, -1.0),
            covariance: Matrix4::identity(),
            track_id: TrackId(0),
            agent_type: AgentType::Vehicle,
            misses: 0,
            age: 3,
            history: alloc::vec![Point2::new(-2.0, 3.0), Point2::new(-0.5, 2.5), Point2::new(1.0, 2.0)],
        };
        let m = predict_modes(&t, 6, 12, 0.5).unwrap();
        assert_eq!(m.k(), 6);
        assert_eq!(m.modes[0].last().unwrap(), Point2::new(1.0 + 3.0 * 6.0, 2.0 - 6.0));
        assert_eq!(m.top(), 0);
        assert_eq!(m.modes[5].last().unwrap(), Point2::new(1.0, 2.0));
    }
}
