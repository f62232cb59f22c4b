//! Decoupled 6-DOF controller: phase correlation drives the translation,
//! SH correlation of normal histograms drives the rotation.
//!
//! Terminology: the reference is the desired model, the target is the
//! current observation. The estimate `H = (R, T)` maps the reference onto
//! the target about the reference centroid `c`:
//! `target ~ R (p - c) + c + T`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::correlation::{rotation_cost_values, Correlator};
use crate::egi::{build_egi, build_egi_linear, DEFAULT_BANDWIDTH};
use crate::error::{Error, Result};
use crate::harmonics::{RealShBasis, ShCoefficients};
use crate::transform::{exp_so3, is_rotation, orthonormalize, RigidTransform};
use crate::translation::{phase_correlate_with, translation_cost, Fft3, PeakOptions, SpectralVolume};
use crate::voxel::{voxelize, GridSpec, VoxelGrid, DEFAULT_DIM, DEFAULT_RESOLUTION};

/// Floor for the iteration-1 rotation gradient norm used in normalization.
pub const ROTATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub lambda_t: f64,
    pub lambda_r: f64,
    pub epsilon_g: f64,
    pub max_iters: usize,
    pub resolution: f64,
    pub dims: [usize; 3],
    pub bandwidth: usize,
    pub l_max: usize,
    /// Divide each gradient norm by its iteration-1 value before testing
    /// against `epsilon_g`.
    pub normalized_stop: bool,
    pub subvoxel: bool,
    /// Width in radians of the Gaussian low-pass applied to both SH
    /// expansions, weight `exp(-s^2 l (l + 1) / 2)` per degree.
    pub smoothing: f64,
    pub binning: Binning,
    /// Abort after this many consecutive increases of `J_t + J_r`.
    pub divergence_window: usize,
    pub orthonormalize_every: usize,
    pub step_scaling: StepScaling,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lambda_t: 0.5,
            lambda_r: 0.1,
            epsilon_g: 1e-3,
            max_iters: 1000,
            resolution: DEFAULT_RESOLUTION,
            dims: [DEFAULT_DIM; 3],
            bandwidth: DEFAULT_BANDWIDTH,
            l_max: DEFAULT_BANDWIDTH - 1,
            normalized_stop: true,
            subvoxel: false,
            smoothing: 0.4,
            binning: Binning::Linear,
            divergence_window: 25,
            orthonormalize_every: 100,
            step_scaling: StepScaling::Scalar,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let gain_ok = |g: f64| g > 0.0 && g < 1.0;
        if !gain_ok(self.lambda_t) || !gain_ok(self.lambda_r) {
            return Err(Error::Validation(format!(
                "gains must lie in (0, 1), got lambda_t={} lambda_r={}",
                self.lambda_t, self.lambda_r
            )));
        }
        if !(self.epsilon_g > 0.0 && self.epsilon_g.is_finite()) {
            return Err(Error::Validation(format!("epsilon_g must be positive, got {}", self.epsilon_g)));
        }
        if self.max_iters == 0 {
            return Err(Error::Validation("max_iters must be positive".into()));
        }
        if self.l_max >= self.bandwidth {
            return Err(Error::Validation(format!(
                "l_max must be below the bandwidth ({} >= {})",
                self.l_max, self.bandwidth
            )));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Validation(format!("smoothing must be non-negative, got {}", self.smoothing)));
        }
        if self.divergence_window == 0 || self.orthonormalize_every == 0 {
            return Err(Error::Validation("divergence_window and orthonormalize_every must be positive".into()));
        }
        GridSpec::new(self.resolution, Vector3::zeros(), self.dims)?;
        crate::egi::SphereGrid::new(self.bandwidth)?;
        Ok(())
    }
}

/// How normals are assigned to sphere nodes for the rotation channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// Integer counts at the nearest node.
    Nearest,
    /// Bilinear weights over the four surrounding nodes.
    Linear,
}

/// How the rotation gradient is turned into a step in radians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepScaling {
    /// Divide by the mean diagonal of the curvature matrix.
    Scalar,
    /// Multiply by the inverse curvature matrix, eigenvalues floored at
    /// `CURVATURE_FLOOR` times the largest.
    Matrix,
}

/// Relative eigenvalue floor used when inverting the curvature matrix.
pub const CURVATURE_FLOOR: f64 = 1e-2;

/// Inverse of a symmetric positive semi-definite matrix with its
/// eigenvalues floored at `floor * max`.
pub fn floored_inverse(m: &Matrix3<f64>, floor: f64) -> Matrix3<f64> {
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.max().max(f64::MIN_POSITIVE);
    let inv = eig.eigenvalues.map(|v| 1.0 / v.max(floor * top));
    eig.eigenvectors * Matrix3::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Normal histogram features of one cloud: bin fractions and the SH
/// coefficients of the matching density.
#[derive(Debug, Clone)]
pub struct RotationFeatures {
    pub fractions: Vec<f64>,
    pub sh: ShCoefficients,
}

/// Everything precomputed once from the reference cloud.
#[derive(Debug, Clone)]
pub struct ReferenceFeatures {
    pub center: Vector3<f64>,
    pub grid: VoxelGrid,
    pub spectrum: SpectralVolume,
    pub rotation: RotationFeatures,
    /// Mean diagonal of the correlation curvature at the identity; the
    /// rotation gradient is divided by it so it reads in radians.
    pub curvature: f64,
    /// Floored inverse of the full curvature matrix.
    pub preconditioner: Matrix3<f64>,
}

/// FFT plans, SH basis and reference features for one controller run.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    fft: Fft3,
    correlator: Correlator,
    reference: ReferenceFeatures,
}

/// Wall time spent in each stage of one measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    /// Pull-back and voxelization of the target.
    pub voxelize: Duration,
    /// Forward FFT and phase correlation.
    pub fft: Duration,
    /// Target EGI and its SH expansion.
    pub sh: Duration,
    /// Costs and the rotation correlation gradient.
    pub gradient: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.voxelize + self.fft + self.sh + self.gradient
    }
}

/// Gradients and costs evaluated at one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Translation in meters that moves the pulled-back target onto the reference.
    pub grad_t: Vector3<f64>,
    /// Rotation correlation gradient, body frame.
    pub grad_r: Vector3<f64>,
    pub jt: f64,
    pub jr: f64,
    pub correlation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoState {
    pub h: RigidTransform,
    pub iteration: usize,
    pub grad_t: Vector3<f64>,
    pub grad_r: Vector3<f64>,
    pub jt: f64,
    pub jr: f64,
}

impl ServoState {
    pub fn new(h: RigidTransform) -> Self {
        Self {
            h,
            iteration: 0,
            grad_t: Vector3::zeros(),
            grad_r: Vector3::zeros(),
            jt: 0.0,
            jr: 0.0,
        }
    }
}

impl Default for ServoState {
    fn default() -> Self {
        Self::new(RigidTransform::identity())
    }
}

/// One row of the per-iteration trace; the pose is the estimate at which
/// the gradients were measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub jt: f64,
    pub jr: f64,
    pub grad_t_norm: f64,
    pub grad_r_norm: f64,
    pub pose: RigidTransform,
}

pub const TRACE_HEADER: &str = "iter,Jt,Jr,grad_t_norm,grad_cr_norm,tx,ty,tz,qw,qx,qy,qz";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn total_costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.jt + r.jr).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let t = r.pose.translation;
            let q = r.pose.quaternion_wxyz();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iteration, r.jt, r.jr, r.grad_t_norm, r.grad_r_norm, t.x, t.y, t.z, q[0], q[1], q[2], q[3]
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub transform: RigidTransform,
    pub center: Vector3<f64>,
    pub status: Status,
    pub trace: Trace,
    pub final_state: ServoState,
}

impl Alignment {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Stop-rule bookkeeping: `|grad_t| + |grad_r| < epsilon_g`, optionally
/// with each norm divided by its first value.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    epsilon: f64,
    scale: Option<(f64, f64)>,
    normalized: bool,
    floor_t: f64,
}

impl StopRule {
    pub fn new(cfg: &ControllerConfig) -> Self {
        Self {
            epsilon: cfg.epsilon_g,
            scale: None,
            normalized: cfg.normalized_stop,
            floor_t: cfg.resolution,
        }
    }

    /// Combined norm; the first call fixes the normalization.
    pub fn measure(&mut self, grad_t: &Vector3<f64>, grad_r: &Vector3<f64>) -> f64 {
        let (nt, nr) = (grad_t.norm(), grad_r.norm());
        if !self.normalized {
            return nt + nr;
        }
        let (st, sr) = *self.scale.get_or_insert((nt.max(self.floor_t), nr.max(ROTATION_FLOOR)));
        nt / st + nr / sr
    }

    pub fn satisfied(&mut self, grad_t: &Vector3<f64>, grad_r: &Vector3<f64>) -> bool {
        self.measure(grad_t, grad_r) < self.epsilon
    }
}

/// EGI as a unit-mass density (bin fraction over node area) and its SH
/// expansion.
pub fn rotation_features(
    cloud: &PointCloud,
    basis: &RealShBasis,
    binning: Binning,
    smoothing: f64,
) -> Result<RotationFeatures> {
    cloud.ensure_nonempty("cloud")?;
    let mut fractions = match binning {
        Binning::Nearest => build_egi(cloud, basis.bandwidth())?.values(),
        Binning::Linear => build_egi_linear(cloud, basis.bandwidth())?,
    };
    let total = cloud.len() as f64;
    fractions.iter_mut().for_each(|v| *v /= total);
    let sh = smooth_degrees(&basis.analyze(&egi_density(&fractions, basis))?, smoothing);
    Ok(RotationFeatures { fractions, sh })
}

/// Scales degree `l` by `exp(-s^2 l (l + 1) / 2)`.
pub fn smooth_degrees(coeffs: &ShCoefficients, s: f64) -> ShCoefficients {
    let mut out = coeffs.clone();
    if s == 0.0 {
        return out;
    }
    for l in 0..=coeffs.l_max() {
        let w = (-0.5 * s * s * (l * (l + 1)) as f64).exp();
        out.degree_mut(l).iter_mut().for_each(|v| *v *= w);
    }
    out
}

/// Bin fractions over node area, so the quadrature integral is 1.
pub fn egi_density(fractions: &[f64], basis: &RealShBasis) -> Vec<f64> {
    let grid = basis.grid();
    let mut out = fractions.to_vec();
    for j in 0..grid.side() {
        let area = basis.node_weight(j);
        for k in 0..grid.side() {
            out[grid.linear(j, k)] /= area;
        }
    }
    out
}

impl Controller {
    /// Precomputes the reference features on a grid centered at the
    /// reference centroid.
    pub fn new(reference: &PointCloud, cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        reference.ensure_nonempty("reference")?;
        let center = reference.centroid();
        let spec = GridSpec::centered(&center, cfg.resolution, cfg.dims)?;
        Self::with_grid(reference, center, spec, cfg)
    }

    pub fn with_grid(reference: &PointCloud, center: Vector3<f64>, spec: GridSpec, cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        reference.ensure_nonempty("reference")?;
        let fft = Fft3::new(spec.dims());
        let correlator = Correlator::new(RealShBasis::with_l_max(cfg.bandwidth, cfg.l_max)?);
        let grid = voxelize(reference, &spec)?;
        let spectrum = fft.forward(&grid);
        let rotation = rotation_features(reference, correlator.basis(), cfg.binning, cfg.smoothing)?;
        let hessian = correlator.curvature(&rotation.sh);
        let curvature = hessian.trace() / 3.0;
        let preconditioner = floored_inverse(&hessian, CURVATURE_FLOOR);
        if curvature.is_nan() || curvature <= 0.0 {
            return Err(Error::Validation("reference normals carry no orientation information".into()));
        }
        Ok(Self {
            cfg,
            fft,
            correlator,
            reference: ReferenceFeatures {
                center,
                grid,
                spectrum,
                rotation,
                curvature,
                preconditioner,
            },
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &ReferenceFeatures {
        &self.reference
    }

    pub fn center(&self) -> Vector3<f64> {
        self.reference.center
    }

    pub fn grid_spec(&self) -> &GridSpec {
        self.reference.grid.spec()
    }

    pub fn basis(&self) -> &RealShBasis {
        self.correlator.basis()
    }

    pub fn target_features(&self, target: &PointCloud) -> Result<RotationFeatures> {
        rotation_features(target, self.basis(), self.cfg.binning, self.cfg.smoothing)
    }

    /// Pulls the target back through `h` and phase-correlates it against
    /// the reference grid; evaluates the rotation correlation of the target
    /// histogram at `h.rotation`.
    pub fn measure(&self, h: &RigidTransform, target: &PointCloud, features: &RotationFeatures) -> Result<Measurement> {
        target.ensure_nonempty("target")?;
        let current = target.inverse_transformed(h, &self.reference.center);
        let grid = voxelize(&current, self.grid_spec())?;
        let spectrum = self.fft.forward(&grid);
        let options = PeakOptions {
            subvoxel: self.cfg.subvoxel,
        };
        let grad_t = phase_correlate_with(&self.fft, &self.reference.spectrum, &spectrum, options)?.grad_t;
        let jt = translation_cost(&self.reference.grid, &grid, &Vector3::zeros())?;

        let reference = &self.reference.rotation;
        let (correlation, grad_r) = self.correlator.evaluate(&reference.sh, &features.sh, &h.rotation)?;
        let jr = rotation_cost_values(&reference.fractions, &features.fractions, self.basis().grid(), &h.rotation)?;
        Ok(Measurement {
            grad_t,
            grad_r,
            jt,
            jr,
            correlation,
        })
    }

    /// Same as computing target features and measuring, with wall time per
    /// stage.
    pub fn measure_timed(&self, h: &RigidTransform, target: &PointCloud) -> Result<(Measurement, StageTimes)> {
        target.ensure_nonempty("target")?;
        let mut times = StageTimes::default();
        let t0 = Instant::now();
        let current = target.inverse_transformed(h, &self.reference.center);
        let grid = voxelize(&current, self.grid_spec())?;
        times.voxelize = t0.elapsed();

        let t0 = Instant::now();
        let spectrum = self.fft.forward(&grid);
        let options = PeakOptions {
            subvoxel: self.cfg.subvoxel,
        };
        let grad_t = phase_correlate_with(&self.fft, &self.reference.spectrum, &spectrum, options)?.grad_t;
        times.fft = t0.elapsed();

        let t0 = Instant::now();
        let features = self.target_features(target)?;
        times.sh = t0.elapsed();

        let t0 = Instant::now();
        let jt = translation_cost(&self.reference.grid, &grid, &Vector3::zeros())?;
        let reference = &self.reference.rotation;
        let (correlation, grad_r) = self.correlator.evaluate(&reference.sh, &features.sh, &h.rotation)?;
        let jr = rotation_cost_values(&reference.fractions, &features.fractions, self.basis().grid(), &h.rotation)?;
        times.gradient = t0.elapsed();
        Ok((
            Measurement {
                grad_t,
                grad_r,
                jt,
                jr,
                correlation,
            },
            times,
        ))
    }

    /// Rotation gradient scaled to radians.
    pub fn rotation_step(&self, grad_r: &Vector3<f64>) -> Vector3<f64> {
        match self.cfg.step_scaling {
            StepScaling::Scalar => grad_r / self.reference.curvature,
            StepScaling::Matrix => self.reference.preconditioner * grad_r,
        }
    }

    /// `R <- R exp(lambda_r hat(grad_r) / k)`, `T <- T - lambda_t R grad_t`,
    /// with `k` the reference curvature.
    pub fn update(&self, h: &RigidTransform, m: &Measurement, iteration: usize) -> RigidTransform {
        let step = self.cfg.lambda_r * self.rotation_step(&m.grad_r);
        let mut rotation = h.rotation * exp_so3(&step);
        if iteration.is_multiple_of(self.cfg.orthonormalize_every) {
            rotation = orthonormalize(&rotation);
        }
        RigidTransform {
            rotation,
            translation: h.translation - self.cfg.lambda_t * (h.rotation * m.grad_t),
        }
    }

    /// One measurement plus the simultaneous update of both channels.
    pub fn step(&self, state: &ServoState, target: &PointCloud, features: &RotationFeatures) -> Result<ServoState> {
        let m = self.measure(&state.h, target, features)?;
        let iteration = state.iteration + 1;
        Ok(ServoState {
            h: self.update(&state.h, &m, iteration),
            iteration,
            grad_t: m.grad_t,
            grad_r: m.grad_r,
            jt: m.jt,
            jr: m.jr,
        })
    }

    /// Iterates from `initial` until the stop rule holds or `max_iters`.
    pub fn align_from(&self, target: &PointCloud, initial: RigidTransform) -> Result<Alignment> {
        let features = self.target_features(target)?;
        let mut rule = StopRule::new(&self.cfg);
        let mut trace = Trace::default();
        let mut state = ServoState::new(initial);
        let mut rising = 0usize;
        let mut previous = f64::INFINITY;
        let mut status = Status::MaxIterations;
        while state.iteration < self.cfg.max_iters {
            let m = self.measure(&state.h, target, &features)?;
            let iteration = state.iteration + 1;
            trace.push(TraceRecord {
                iteration,
                jt: m.jt,
                jr: m.jr,
                grad_t_norm: m.grad_t.norm(),
                grad_r_norm: m.grad_r.norm(),
                pose: state.h,
            });
            let total = m.jt + m.jr;
            rising = if total > previous { rising + 1 } else { 0 };
            previous = total;
            if rising >= self.cfg.divergence_window {
                return Err(Error::Diverged {
                    iteration,
                    streak: rising,
                });
            }
            let done = rule.satisfied(&m.grad_t, &m.grad_r);
            state = ServoState {
                h: if done { state.h } else { self.update(&state.h, &m, iteration) },
                iteration,
                grad_t: m.grad_t,
                grad_r: m.grad_r,
                jt: m.jt,
                jr: m.jr,
            };
            debug_assert!(is_rotation(&state.h.rotation, 1e-6));
            if done {
                status = Status::Converged;
                break;
            }
        }
        Ok(Alignment {
            transform: state.h,
            center: self.reference.center,
            status,
            trace,
            final_state: state,
        })
    }

    pub fn align(&self, target: &PointCloud) -> Result<Alignment> {
        self.align_from(target, RigidTransform::identity())
    }
}

/// One measurement and update with freshly computed target features.
pub fn servo_step(controller: &Controller, state: &ServoState, target: &PointCloud) -> Result<ServoState> {
    let features = controller.target_features(target)?;
    controller.step(state, target, &features)
}

/// Estimates `H` with `target ~ H(reference)` about the reference centroid.
pub fn run_alignment(reference: &PointCloud, target: &PointCloud, cfg: ControllerConfig) -> Result<Alignment> {
    Controller::new(reference, cfg)?.align(target)
}

/// Pose error summary between an estimate and ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub translation: Vector3<f64>,
    /// Rotation vector of `R_true R_est^T`.
    pub rotation: Vector3<f64>,
}

impl PoseError {
    pub fn between(truth: &RigidTransform, estimate: &RigidTransform) -> Self {
        Self {
            translation: truth.translation - estimate.translation,
            rotation: crate::transform::log_so3(&(truth.rotation * estimate.rotation.transpose())),
        }
    }

    /// Mean of the squared per-axis translation errors (m^2).
    pub fn translation_mse(&self) -> f64 {
        self.translation.norm_squared() / 3.0
    }

    /// Mean of the squared rotation-vector components (rad^2).
    pub fn rotation_mse(&self) -> f64 {
        self.rotation.norm_squared() / 3.0
    }

    pub fn max_axis_translation(&self) -> f64 {
        self.translation.amax()
    }

    pub fn angle(&self) -> f64 {
        self.rotation.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::asymmetric_object;
    use crate::transform::geodesic_angle;

    fn object() -> PointCloud {
        asymmetric_object(6000, 3).unwrap()
    }

    fn moved(cloud: &PointCloud, h: &RigidTransform) -> PointCloud {
        cloud.transformed(h, &cloud.centroid())
    }

    #[test]
    fn config_validation() {
        assert!(ControllerConfig::default().validate().is_ok());
        let bad = ControllerConfig {
            lambda_t: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ControllerConfig {
            l_max: 16,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ControllerConfig {
            dims: [64, 48, 64],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn aligned_clouds_are_a_fixed_point() {
        let c = object();
        let ctl = Controller::new(&c, ControllerConfig::default()).unwrap();
        let next = servo_step(&ctl, &ServoState::default(), &c).unwrap();
        assert_eq!(next.grad_t, Vector3::zeros());
        assert!(next.grad_r.norm() < 1e-6);
        assert!((next.h.rotation - Matrix3::identity()).abs().max() < 1e-6);
        assert!(next.h.translation.norm() < 1e-6);

        let out = ctl.align(&c).unwrap();
        assert!(out.converged());
        assert_eq!(out.iterations(), 1);
        assert_eq!(out.transform, RigidTransform::identity());
    }

    #[test]
    fn translation_residual_halves() {
        let c = object();
        let r = DEFAULT_RESOLUTION;
        let truth = RigidTransform::from_translation(Vector3::new(3.0 * r, 0.0, 0.0));
        let target = moved(&c, &truth);
        let ctl = Controller::new(&c, ControllerConfig::default()).unwrap();
        let s0 = ServoState::default();
        let s1 = servo_step(&ctl, &s0, &target).unwrap();
        let residual = (truth.translation - s1.h.translation).norm();
        assert!((residual - 1.5 * r).abs() < 1e-12, "{residual}");
        let s2 = servo_step(&ctl, &s1, &target).unwrap();
        assert!(s2.jt < s1.jt);
    }

    #[test]
    fn z_rotation_gradient_points_along_z() {
        let c = object();
        let truth = RigidTransform::from_rotation(exp_so3(&Vector3::new(0.0, 0.0, 30f64.to_radians())));
        let target = moved(&c, &truth);
        let ctl = Controller::new(&c, ControllerConfig::default()).unwrap();
        let s1 = servo_step(&ctl, &ServoState::default(), &target).unwrap();
        let g = s1.grad_r;
        assert!(g.z > 0.0);
        assert!(g.x.abs() < 0.1 * g.z && g.y.abs() < 0.1 * g.z, "{g:?}");
    }

    #[test]
    fn recovers_a_rigid_motion() {
        let c = object();
        let truth = RigidTransform::from_rotation_vector(Vector3::new(0.3, -0.5, 0.4), Vector3::new(0.04, -0.03, 0.02));
        let target = moved(&c, &truth);
        let out = run_alignment(&c, &target, ControllerConfig::default()).unwrap();
        assert!(out.converged(), "{} iterations", out.iterations());
        let err = PoseError::between(&truth, &out.transform);
        assert!(err.max_axis_translation() <= DEFAULT_RESOLUTION, "{:?}", err.translation);
        assert!(geodesic_angle(&truth.rotation, &out.transform.rotation) < 5f64.to_radians());
    }

    #[test]
    fn empty_target_rejected() {
        let c = object();
        let ctl = Controller::new(&c, ControllerConfig::default()).unwrap();
        let empty = PointCloud::new(vec![], vec![]).unwrap();
        assert!(matches!(servo_step(&ctl, &ServoState::default(), &empty), Err(Error::Empty(_))));
    }

    #[test]
    fn target_outside_grid_names_axis() {
        let c = object();
        let ctl = Controller::new(&c, ControllerConfig::default()).unwrap();
        let far = moved(&c, &RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.0)));
        match servo_step(&ctl, &ServoState::default(), &far) {
            Err(Error::OutOfGrid { axis, .. }) => assert_eq!(axis, 'z'),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_csv_layout() {
        let c = object();
        let out = run_alignment(&c, &c, ControllerConfig::default()).unwrap();
        let csv = out.trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 12);
        assert!(lines[1].starts_with("1,0,0,0,"));
    }

    #[test]
    fn stop_rule_normalizes_by_first_values() {
        let cfg = ControllerConfig::default();
        let mut rule = StopRule::new(&cfg);
        let first = rule.measure(&Vector3::new(0.08, 0.0, 0.0), &Vector3::new(0.0, 0.2, 0.0));
        assert!((first - 2.0).abs() < 1e-12);
        assert!(rule.satisfied(&Vector3::zeros(), &Vector3::new(1e-5, 0.0, 0.0)));
        assert!(!rule.satisfied(&Vector3::new(0.008, 0.0, 0.0), &Vector3::zeros()));
        let mut raw = StopRule::new(&ControllerConfig {
            normalized_stop: false,
            ..cfg
        });
        assert!((raw.measure(&Vector3::new(3.0, 4.0, 0.0), &Vector3::new(0.0, 0.0, 1.0)) - 6.0).abs() < 1e-12);
    }
}
