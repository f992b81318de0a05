//! Coordinate frames, trajectory transforms, pinhole projection and the
//! displacement-error primitives used by the metrics.
//!
//! Conventions: the global and ego frames are right-handed with `z` up.
//! A [`FrameTransform`] maps its `origin` to `(0, 0)` and its `heading`
//! direction onto `+y`, so in an ego or allocentric frame `+y` is forward
//! and `+x` is to the right.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, PI};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        math::atan2(self.y, self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Coordinate frame a trajectory is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    Global,
    Ego,
    Allocentric,
    Image,
}

/// Ordered future waypoints. The current position is not included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Point2>,
    pub frame: FrameTag,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Point2>, frame: FrameTag) -> Self {
        Self { waypoints, frame }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn last(&self) -> Option<Point2> {
        self.waypoints.last().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.waypoints.iter().all(|p| p.is_finite())
    }
}

/// Rigid 2D frame: `origin` maps to `(0, 0)` and the `heading` direction
/// (radians, counter-clockwise from global `+x`) maps to `+y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform {
    pub origin: Point2,
    pub heading: f64,
}

impl FrameTransform {
    /// The transform that leaves points unchanged.
    pub const IDENTITY: FrameTransform = FrameTransform {
        origin: Point2::ZERO,
        heading: PI / 2.0,
    };

    pub fn new(origin: Point2, heading: f64) -> Self {
        Self {
            origin,
            heading: math::wrap_angle(heading),
        }
    }

    fn rotation(&self) -> f64 {
        PI / 2.0 - self.heading
    }

    /// Global point into this frame.
    pub fn to_local(&self, p: Point2) -> Point2 {
        (p - self.origin).rotate(self.rotation())
    }

    /// Point in this frame back to global.
    pub fn to_global(&self, p: Point2) -> Point2 {
        p.rotate(-self.rotation()) + self.origin
    }

    /// Free vector (velocity, offset) into this frame.
    pub fn vector_to_local(&self, v: Point2) -> Point2 {
        v.rotate(self.rotation())
    }

    pub fn vector_to_global(&self, v: Point2) -> Point2 {
        v.rotate(-self.rotation())
    }

    /// Heading (global) expressed relative to this frame's `+x` axis.
    pub fn heading_to_local(&self, heading: f64) -> f64 {
        math::wrap_angle(heading + self.rotation())
    }

    pub fn heading_to_global(&self, heading: f64) -> f64 {
        math::wrap_angle(heading - self.rotation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Global to local.
    Forward,
    /// Local back to global.
    Inverse,
}

pub fn transform_trajectory(
    traj: &Trajectory,
    frame: &FrameTransform,
    direction: Direction,
) -> Result<Trajectory> {
    if !traj.is_finite() || !frame.origin.is_finite() || !frame.heading.is_finite() {
        return Err(Error::invalid("non-finite coordinate in trajectory transform"));
    }
    let (waypoints, tag) = match direction {
        Direction::Forward => (
            traj.waypoints.iter().map(|&p| frame.to_local(p)).collect(),
            FrameTag::Allocentric,
        ),
        Direction::Inverse => (
            traj.waypoints.iter().map(|&p| frame.to_global(p)).collect(),
            FrameTag::Global,
        ),
    };
    Ok(Trajectory::new(waypoints, tag))
}

/// Average and final displacement error between two equal-length trajectories.
pub fn displacement_errors(pred: &Trajectory, gt: &Trajectory) -> Result<(f64, f64)> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(alloc::format!(
            "trajectory length mismatch: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let mut sum = 0.0;
    let mut last = 0.0;
    for (a, b) in pred.waypoints.iter().zip(&gt.waypoints) {
        last = a.distance(*b);
        sum += last;
    }
    Ok((sum / pred.len() as f64, last))
}

/// Heading of a velocity vector; stationary agents keep `fallback`.
pub fn velocity_heading(velocity: Point2, fallback: f64) -> f64 {
    if velocity.norm() < STATIONARY_SPEED {
        fallback
    } else {
        velocity.angle()
    }
}

/// Speeds below this (m/s) count as stationary for heading purposes.
pub const STATIONARY_SPEED: f64 = 1e-6;

/// Pinhole camera. The extrinsic maps a point `p` in the reference frame to
/// camera coordinates `R p + t` (`x` right, `y` down, `z` forward).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsic: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: f64,
    pub height: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let (fx, fy) = (self.intrinsic[(0, 0)], self.intrinsic[(1, 1)]);
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("camera intrinsic has non-positive focal length"));
        }
        let gram = self.rotation.transpose() * self.rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-9 {
            return Err(Error::invalid("camera rotation is not orthonormal"));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::invalid("camera image size must be positive"));
        }
        Ok(())
    }

    /// Camera mounted on the ego vehicle at `mount_height`, looking
    /// horizontally at `yaw` radians counter-clockwise from ego forward.
    pub fn ego_mounted(yaw: f64, mount_height: f64, focal: f64, width: f64, height: f64) -> Self {
        let (s, c) = (math::sin(yaw), math::cos(yaw));
        let right = Vector3::new(c, s, 0.0);
        let down = Vector3::new(0.0, 0.0, -1.0);
        let forward = Vector3::new(-s, c, 0.0);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let center = Vector3::new(0.0, 0.0, mount_height);
        let translation = -(rotation * center);
        let intrinsic = Matrix3::new(
            focal, 0.0, width / 2.0, //
            0.0, focal, height / 2.0, //
            0.0, 0.0, 1.0,
        );
        Self {
            intrinsic,
            rotation,
            translation,
            width,
            height,
        }
    }

    /// Six-camera surround rig with a wide rear camera.
    pub fn surround_rig() -> Vec<CameraModel> {
        let deg = PI / 180.0;
        let (w, h, f) = (1600.0, 900.0, 1266.0);
        [0.0, 55.0, -55.0, 110.0, -110.0]
            .iter()
            .map(|&yaw| CameraModel::ego_mounted(yaw * deg, 1.5, f, w, h))
            .chain(core::iter::once(CameraModel::ego_mounted(180.0 * deg, 1.5, 800.0, w, h)))
            .collect()
    }
}

/// Projects `p` into pixel coordinates. `None` when the point is at or
/// behind the camera plane or lands outside the image.
pub fn project_to_camera(p: Point3, cam: &CameraModel) -> Result<Option<Point2>> {
    if cam.intrinsic[(0, 0)] == 0.0 || cam.intrinsic[(1, 1)] == 0.0 {
        return Err(Error::invalid("degenerate camera intrinsic (zero focal length)"));
    }
    if !p.is_finite() {
        return Err(Error::invalid("non-finite point"));
    }
    let pc = cam.rotation * Vector3::new(p.x, p.y, p.z) + cam.translation;
    if pc.z <= 0.0 {
        return Ok(None);
    }
    let uvw = cam.intrinsic * pc;
    let (u, v) = (uvw.x / uvw.z, uvw.y / uvw.z);
    if u < 0.0 || v < 0.0 || u >= cam.width || v >= cam.height {
        return Ok(None);
    }
    Ok(Some(Point2::new(u, v)))
}

/// One piece of a piecewise constant-speed, constant-turn-rate motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSegment {
    /// Seconds; the final segment of a plan may be `f64::INFINITY`.
    pub duration: f64,
    pub speed: f64,
    /// rad/s, counter-clockwise positive.
    pub yaw_rate: f64,
}

/// Kinematic state at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub position: Point2,
    /// Direction of travel; kept through stationary segments.
    pub heading: f64,
    pub speed: f64,
}

impl KinematicState {
    pub fn velocity(&self) -> Point2 {
        Point2::new(math::cos(self.heading), math::sin(self.heading)) * self.speed
    }
}

/// Closed-form advance of a constant-speed, constant-turn-rate motion.
fn advance(state: KinematicState, speed: f64, yaw_rate: f64, tau: f64) -> KinematicState {
    let th = state.heading;
    let position = if yaw_rate.abs() < 1e-12 {
        state.position + Point2::new(math::cos(th), math::sin(th)) * (speed * tau)
    } else {
        let r = speed / yaw_rate;
        let th2 = th + yaw_rate * tau;
        state.position
            + Point2::new(
                r * (math::sin(th2) - math::sin(th)),
                -r * (math::cos(th2) - math::cos(th)),
            )
    };
    KinematicState {
        position,
        heading: th + yaw_rate * tau,
        speed,
    }
}

/// Piecewise motion plan starting from a known state.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPlan {
    pub start: Point2,
    pub heading: f64,
    pub segments: Vec<MotionSegment>,
}

impl MotionPlan {
    /// State `t` seconds after the start. Beyond the last segment the final
    /// speed and turn rate persist.
    pub fn state_at(&self, t: f64) -> KinematicState {
        let first_speed = self.segments.first().map_or(0.0, |s| s.speed);
        let mut st = KinematicState {
            position: self.start,
            heading: self.heading,
            speed: first_speed,
        };
        let mut remaining = t;
        for (i, seg) in self.segments.iter().enumerate() {
            let last = i + 1 == self.segments.len();
            let tau = if last { remaining } else { remaining.min(seg.duration) };
            st = advance(st, seg.speed, seg.yaw_rate, tau);
            remaining -= tau;
            if remaining <= 0.0 {
                break;
            }
        }
        st
    }

    /// Positions at `dt, 2 dt, ..., steps * dt`.
    pub fn rollout(&self, dt: f64, steps: usize) -> Vec<Point2> {
        (1..=steps).map(|k| self.state_at(k as f64 * dt).position).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;

    fn traj(pts: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(), FrameTag::Global)
    }

    #[test]
    fn identity_frame_is_noop() {
        let t = traj(&[(1.0, 2.0), (-3.5, 0.25)]);
        let out = transform_trajectory(&t, &FrameTransform::IDENTITY, Direction::Forward).unwrap();
        for (a, b) in out.waypoints.iter().zip(&t.waypoints) {
            assert!((a.x - b.x).abs() < 1e-15 && (a.y - b.y).abs() < 1e-15);
        }
    }

    #[test]
    fn origin_maps_to_zero_and_heading_to_plus_y() {
        let f = FrameTransform::new(Point2::new(3.0, -7.0), 0.4);
        let o = f.to_local(Point2::new(3.0, -7.0));
        assert_eq!(o, Point2::ZERO);
        let dir = f.vector_to_local(Point2::new(math::cos(0.4), math::sin(0.4)));
        assert!(dir.x.abs() < 1e-12 && (dir.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_seeded() {
        let mut rng = math::rng_from(11);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let t = Trajectory::new(
                (0..n)
                    .map(|_| Point2::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)))
                    .collect(),
                FrameTag::Global,
            );
            let f = FrameTransform::new(
                Point2::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0)),
                rng.random_range(-PI..PI),
            );
            let fw = transform_trajectory(&t, &f, Direction::Forward).unwrap();
            let back = transform_trajectory(&fw, &f, Direction::Inverse).unwrap();
            for (a, b) in back.waypoints.iter().zip(&t.waypoints) {
                assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let t = traj(&[(f64::NAN, 0.0)]);
        assert!(matches!(
            transform_trajectory(&t, &FrameTransform::IDENTITY, Direction::Forward),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn displacement_cases() {
        let gt = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(displacement_errors(&gt, &gt).unwrap(), (0.0, 0.0));
        let shifted = traj(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        assert_eq!(displacement_errors(&shifted, &gt).unwrap(), (1.0, 1.0));
        // per-step distances 1, 2, 3 -> ade (1+2+3)/3 = 2, fde 3
        let pred = traj(&[(0.0, 1.0), (1.0, 2.0), (2.0, -3.0)]);
        assert_eq!(displacement_errors(&pred, &gt).unwrap(), (2.0, 3.0));
        assert!(displacement_errors(&traj(&[(0.0, 0.0)]), &gt).is_err());
    }

    fn simple_cam() -> CameraModel {
        CameraModel {
            intrinsic: Matrix3::new(500.0, 0.0, 320.0, 0.0, 400.0, 240.0, 0.0, 0.0, 1.0),
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            width: 640.0,
            height: 480.0,
        }
    }

    #[test]
    fn projection_cases() {
        let cam = simple_cam();
        assert_eq!(
            project_to_camera(Point3::new(0.0, 0.0, 1.0), &cam).unwrap(),
            Some(Point2::new(320.0, 240.0))
        );
        assert_eq!(project_to_camera(Point3::new(0.0, 0.0, -2.0), &cam).unwrap(), None);
        assert_eq!(project_to_camera(Point3::new(0.0, 0.0, 0.0), &cam).unwrap(), None);
        assert_eq!(project_to_camera(Point3::new(50.0, 0.0, 1.0), &cam).unwrap(), None);
        let mut bad = cam.clone();
        bad.intrinsic[(0, 0)] = 0.0;
        assert!(project_to_camera(Point3::new(0.0, 0.0, 1.0), &bad).is_err());
    }

    #[test]
    fn projection_matches_manual_matmul() {
        let yaw: f64 = 0.3;
        let (s, c) = (yaw.sin(), yaw.cos());
        let rot = Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c);
        let cam = CameraModel {
            rotation: rot,
            translation: Vector3::new(0.2, -0.1, 0.5),
            ..simple_cam()
        };
        cam.validate().unwrap();
        let p = [0.7, -0.4, 3.0];
        // explicit row-by-row multiply
        let r = [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]];
        let t = [0.2, -0.1, 0.5];
        let mut pc = [0.0; 3];
        for i in 0..3 {
            pc[i] = r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i];
        }
        let k = [[500.0, 0.0, 320.0], [0.0, 400.0, 240.0], [0.0, 0.0, 1.0]];
        let mut uvw = [0.0; 3];
        for i in 0..3 {
            uvw[i] = k[i][0] * pc[0] + k[i][1] * pc[1] + k[i][2] * pc[2];
        }
        let got = project_to_camera(Point3::new(p[0], p[1], p[2]), &cam).unwrap().unwrap();
        assert!((got.x - uvw[0] / uvw[2]).abs() < 1e-9);
        assert!((got.y - uvw[1] / uvw[2]).abs() < 1e-9);
    }

    #[test]
    fn rig_sees_surroundings() {
        let rig = CameraModel::surround_rig();
        for cam in &rig {
            cam.validate().unwrap();
        }
        for k in 0..36 {
            let a = k as f64 * 10.0 * PI / 180.0;
            let p = Point3::new(20.0 * math::cos(a), 20.0 * math::sin(a), 0.8);
            let seen = rig.iter().filter(|c| project_to_camera(p, c).unwrap().is_some()).count();
            assert!(seen >= 1, "blind spot at {k}0 deg");
        }
    }

    #[test]
    fn plan_straight_and_turn() {
        let plan = MotionPlan {
            start: Point2::ZERO,
            heading: 0.0,
            segments: vec![
                MotionSegment { duration: 1.0, speed: 2.0, yaw_rate: 0.0 },
                MotionSegment { duration: 2.0, speed: 2.0, yaw_rate: PI / 4.0 },
                MotionSegment { duration: f64::INFINITY, speed: 2.0, yaw_rate: 0.0 },
            ],
        };
        let s = plan.state_at(1.0);
        assert!((s.position.x - 2.0).abs() < 1e-12);
        let end = plan.state_at(3.0);
        assert!((end.heading - PI / 2.0).abs() < 1e-12);
        // quarter circle of radius 2/(pi/4)
        let r = 2.0 / (PI / 4.0);
        assert!((end.position.x - (2.0 + r)).abs() < 1e-9);
        assert!((end.position.y - r).abs() < 1e-9);
    }
}
