//! Closed-loop camera positioning: a virtual depth sensor renders the scene
//! from the current camera pose, one controller measurement per tick turns
//! into a camera twist, and the twist moves either a free-flying camera or
//! a simulated arm.

use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::arm::{body_error, SimulatedArm};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::servo::{Controller, ControllerConfig, Status, StepScaling, StopRule, Trace, TraceRecord};
use crate::shapes::{add_position_noise, partial_view, tabletop_scene};
use crate::transform::{exp_so3, geodesic_angle, RigidTransform};

/// Grid used for closed-loop runs: 128 cells of 8 mm, wide enough for a
/// 30 degree turn of a camera 35 cm from the scene.
pub const SERVO_DIM: usize = 128;

/// Controller defaults for closed-loop runs.
pub fn servo_config() -> ControllerConfig {
    ControllerConfig {
        dims: [SERVO_DIM; 3],
        step_scaling: StepScaling::Matrix,
        ..ControllerConfig::default()
    }
}

/// Back-face-culled view of a world-frame scene, expressed in the camera
/// frame, with optional Gaussian position noise.
#[derive(Debug, Clone)]
pub struct VirtualSensor {
    pub scene: PointCloud,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Drop points whose normal faces away from the camera.
    pub cull_backfaces: bool,
}

impl VirtualSensor {
    pub fn new(scene: PointCloud) -> Self {
        Self {
            scene,
            noise_sigma: 0.0,
            seed: 0,
            cull_backfaces: true,
        }
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }

    /// `camera` maps camera coordinates to world coordinates.
    pub fn capture(&self, camera: &RigidTransform, tick: usize) -> Result<PointCloud> {
        let visible = if self.cull_backfaces {
            partial_view(&self.scene, &camera.translation)
        } else {
            self.scene.clone()
        };
        if visible.is_empty() {
            return Err(Error::Empty(format!("sensor view at tick {tick}")));
        }
        let local = visible.transformed(&camera.inverse(), &Vector3::zeros());
        Ok(add_position_noise(&local, self.noise_sigma, self.seed.wrapping_add(tick as u64)))
    }
}

/// What the camera twist drives.
#[derive(Debug, Clone)]
pub enum Platform {
    /// The twist is integrated directly on the camera pose.
    FreeFlying,
    /// The twist becomes joint rates through the pseudo-inverse Jacobian.
    Arm(SimulatedArm),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSample {
    pub tick: usize,
    pub pose: RigidTransform,
    pub jt: f64,
    pub jr: f64,
    pub joints: Option<Vec<f64>>,
}

pub const TRAJECTORY_HEADER: &str = "tick,tx,ty,tz,qw,qx,qy,qz,Jt,Jr";

#[derive(Debug, Clone)]
pub struct ServoRun {
    pub status: Status,
    pub goal: RigidTransform,
    /// Camera pose at every observation, first row is the start pose.
    pub trajectory: Vec<PoseSample>,
    pub trace: Trace,
    pub final_pose: RigidTransform,
    pub final_joints: Option<Vec<f64>>,
}

impl ServoRun {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn translation_error(&self) -> f64 {
        (self.final_pose.translation - self.goal.translation).norm()
    }

    pub fn rotation_error(&self) -> f64 {
        geodesic_angle(&self.final_pose.rotation, &self.goal.rotation)
    }

    /// Length of the camera-center path.
    pub fn path_length(&self) -> f64 {
        let mut length: f64 = self
            .trajectory
            .windows(2)
            .map(|w| (w[1].pose.translation - w[0].pose.translation).norm())
            .sum();
        if let Some(last) = self.trajectory.last() {
            length += (self.final_pose.translation - last.pose.translation).norm();
        }
        length
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_HEADER);
        out.push('\n');
        for s in &self.trajectory {
            let t = s.pose.translation;
            let q = s.pose.quaternion_wxyz();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.tick, t.x, t.y, t.z, q[0], q[1], q[2], q[3], s.jt, s.jr
            );
        }
        out
    }
}

/// Camera twist `(v, w)` in the camera frame for the incremental motion
/// `q` given about `center`.
pub fn twist_from_increment(q: &RigidTransform, center: &Vector3<f64>) -> [f64; 6] {
    body_error(&RigidTransform::identity(), &q.about_origin(center))
}

/// Runs the closed loop from `start` toward the pose where the reference
/// view was captured. For an arm platform the arm's current joints must
/// place the camera at `start`.
pub fn run_servo_sim(
    sensor: &VirtualSensor,
    goal: &RigidTransform,
    start: &RigidTransform,
    platform: Platform,
    cfg: ControllerConfig,
) -> Result<ServoRun> {
    let reference = sensor.capture(goal, 0)?;
    let controller = Controller::new(&reference, cfg)?;
    let center = controller.center();
    let mut arm = match platform {
        Platform::FreeFlying => None,
        Platform::Arm(arm) => {
            arm.check_limits(&arm.q)?;
            Some(arm)
        }
    };
    let mut pose = *start;
    let mut rule = StopRule::new(&cfg);
    let mut trace = Trace::default();
    let mut trajectory = Vec::new();
    let mut status = Status::MaxIterations;
    let mut rising = 0usize;
    let mut previous = f64::INFINITY;

    for tick in 1..=cfg.max_iters {
        let observation = sensor.capture(&pose, tick)?;
        let features = controller.target_features(&observation)?;
        let m = controller.measure(&RigidTransform::identity(), &observation, &features)?;
        trace.push(TraceRecord {
            iteration: tick,
            jt: m.jt,
            jr: m.jr,
            grad_t_norm: m.grad_t.norm(),
            grad_r_norm: m.grad_r.norm(),
            pose,
        });
        trajectory.push(PoseSample {
            tick,
            pose,
            jt: m.jt,
            jr: m.jr,
            joints: arm.as_ref().map(|a| a.q.clone()),
        });
        let total = m.jt + m.jr;
        rising = if total > previous { rising + 1 } else { 0 };
        previous = total;
        if rising >= cfg.divergence_window {
            return Err(Error::Diverged {
                iteration: tick,
                streak: rising,
            });
        }
        if rule.satisfied(&m.grad_t, &m.grad_r) {
            status = Status::Converged;
            break;
        }
        let increment = controller.update(&RigidTransform::identity(), &m, tick);
        pose = match arm.as_mut() {
            None => pose.compose(&increment.about_origin(&center)),
            Some(arm) => {
                arm.apply_twist(&twist_from_increment(&increment, &center))?;
                arm.camera_pose()
            }
        };
    }

    Ok(ServoRun {
        status,
        goal: *goal,
        trajectory,
        trace,
        final_pose: pose,
        final_joints: arm.map(|a| a.q),
    })
}

/// Tabletop scene in front of a 7-joint arm. The goal camera sits 35 cm
/// from the scene center on the arm side, looking down at 40 degrees from
/// the vertical; the arm starts with the camera at the goal.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub scene: PointCloud,
    pub goal: RigidTransform,
    pub arm: SimulatedArm,
}

/// Joint configuration used to seed inverse kinematics for the goal.
pub const ARM_SEED_JOINTS: [f64; 7] = [0.55, 1.2, -1.13, -1.26, -1.55, -0.75, -0.85];

pub const SCENE_CENTER: [f64; 3] = [1.0, 0.0, 0.0];
pub const CAMERA_DISTANCE: f64 = 0.35;
pub const CAMERA_TILT: f64 = 0.7;

/// Camera pose at `distance` from `target`, tilted by `tilt` radians from
/// looking straight down, with the camera on the `-x` side of the target.
pub fn looking_at(target: Vector3<f64>, distance: f64, tilt: f64) -> RigidTransform {
    let rotation = exp_so3(&Vector3::new(std::f64::consts::PI, 0.0, 0.0)) * exp_so3(&Vector3::new(0.0, tilt, 0.0));
    RigidTransform {
        rotation,
        translation: target + distance * Vector3::new(-tilt.sin(), 0.0, tilt.cos()),
    }
}

impl Scenario {
    pub fn standard(samples_per_object: usize, seed: u64) -> Result<Self> {
        Self::with_scene(tabletop_scene(samples_per_object, seed)?)
    }

    /// Places `scene` (given about the origin) at the standard spot.
    pub fn with_scene(scene: PointCloud) -> Result<Self> {
        let center = Vector3::from(SCENE_CENTER);
        let scene = scene.transformed(&RigidTransform::from_translation(center), &Vector3::zeros());
        let goal = looking_at(center, CAMERA_DISTANCE, CAMERA_TILT);
        let arm = SimulatedArm::seven_dof().with_joints(&ARM_SEED_JOINTS)?;
        let q = arm.solve_ik(&goal, 500, 1e-12)?;
        let arm = arm.with_joints(&q)?;
        Ok(Self { scene, goal, arm })
    }

    /// Goal displaced by a motion expressed in the goal camera frame.
    pub fn displaced(&self, translation: Vector3<f64>, rotation_vector: Vector3<f64>) -> RigidTransform {
        self.goal.compose(&RigidTransform::from_rotation_vector(rotation_vector, translation))
    }

    /// The arm with its joints solved so the camera sits at `pose`.
    pub fn arm_at(&self, pose: &RigidTransform) -> Result<SimulatedArm> {
        let q = self.arm.solve_ik(pose, 1000, 1e-12)?;
        self.arm.clone().with_joints(&q)
    }
}

/// Rotation vector of `angle` radians about `axis`.
pub fn rotation_about(axis: Vector3<f64>, angle: f64) -> Vector3<f64> {
    axis.normalize() * angle
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ControllerConfig {
        ControllerConfig {
            max_iters: 400,
            ..servo_config()
        }
    }

    #[test]
    fn start_at_goal_converges_immediately() {
        let s = Scenario::standard(1500, 1).unwrap();
        let sensor = VirtualSensor::new(s.scene.clone());
        let run = run_servo_sim(&sensor, &s.goal, &s.goal, Platform::FreeFlying, quick()).unwrap();
        assert!(run.converged());
        assert_eq!(run.trajectory.len(), 1);
        assert_eq!(run.path_length(), 0.0);
        assert_eq!(run.trajectory_csv().lines().count(), 2);
    }

    #[test]
    fn free_flying_camera_reaches_goal() {
        let s = Scenario::standard(3000, 2).unwrap();
        let sensor = VirtualSensor::new(s.scene.clone());
        let start = s.displaced(Vector3::new(0.05, 0.03, -0.04), rotation_about(Vector3::new(1.0, -2.0, 0.5), 20f64.to_radians()));
        let run = run_servo_sim(&sensor, &s.goal, &start, Platform::FreeFlying, quick()).unwrap();
        assert!(run.converged(), "{:?} after {} ticks", run.status, run.trajectory.len());
        assert!(run.translation_error() <= 0.008, "{}", run.translation_error());
        assert!(run.rotation_error().to_degrees() <= 5.0, "{}", run.rotation_error().to_degrees());
    }

    #[test]
    fn empty_view_aborts() {
        let plate = PointCloud::new(vec![Vector3::zeros()], vec![Vector3::z()]).unwrap();
        let sensor = VirtualSensor::new(plate);
        let below = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(sensor.capture(&below, 0), Err(Error::Empty(_))));
        let err = run_servo_sim(&sensor, &below, &below, Platform::FreeFlying, quick()).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn arm_joint_limit_is_reported() {
        let s = Scenario::standard(500, 4).unwrap();
        let sensor = VirtualSensor::new(s.scene.clone());
        let mut arm = s.arm.clone();
        arm.q[1] = 3.0;
        match run_servo_sim(&sensor, &s.goal, &s.goal, Platform::Arm(arm), quick()) {
            Err(Error::JointLimit { joint, .. }) => assert_eq!(joint, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn twist_of_pure_translation() {
        let q = RigidTransform::from_translation(Vector3::new(0.01, -0.02, 0.0));
        let t = twist_from_increment(&q, &Vector3::new(0.0, 0.0, 0.4));
        assert_eq!(t, [0.01, -0.02, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sensor_is_frame_consistent() {
        let s = Scenario::standard(800, 5).unwrap();
        let sensor = VirtualSensor::new(s.scene.clone());
        let view = sensor.capture(&s.goal, 0).unwrap();
        let back = view.transformed(&s.goal, &Vector3::zeros());
        let world = partial_view(&s.scene, &s.goal.translation);
        for (a, b) in back.points().iter().zip(world.points()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
