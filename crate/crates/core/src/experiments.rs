//! Seeded registration trials: full copy, partial view, and cluttered scene.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::servo::{run_alignment, Alignment, ControllerConfig, PoseError};
use crate::shapes::{add_position_noise, asymmetric_object, generate_shape, partial_view, ShapeKind};
use crate::transform::{exp_so3, RigidTransform};

/// Experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    /// Full model against a rigidly moved copy.
    C1,
    /// Full model against a back-face-culled view of the moved copy.
    C2,
    /// Model against a scene holding the moved model and two distractors.
    C3,
    /// Closed-loop camera positioning.
    Servo,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C1" => Ok(Self::C1),
            "C2" => Ok(Self::C2),
            "C3" => Ok(Self::C3),
            "SERVO" => Ok(Self::Servo),
            other => Err(Error::Validation(format!("unknown experiment {other:?}"))),
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::Servo => "servo",
        })
    }
}

/// Limits for random ground-truth motions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialLimits {
    /// Per-axis translation bound in meters.
    pub max_translation: f64,
    /// Rotation angle bound in radians.
    pub max_angle: f64,
    pub samples: usize,
    /// Minimum fraction of points a partial view must keep.
    pub min_retained: f64,
    pub noise_sigma: f64,
}

impl Default for TrialLimits {
    fn default() -> Self {
        Self {
            max_translation: 10.0 * crate::voxel::DEFAULT_RESOLUTION,
            max_angle: 60f64.to_radians(),
            samples: 6000,
            min_retained: 0.4,
            noise_sigma: 0.0,
        }
    }
}

/// A reference, a target, and the motion relating them about the
/// reference centroid.
#[derive(Debug, Clone)]
pub struct Trial {
    pub experiment: Experiment,
    pub seed: u64,
    pub reference: PointCloud,
    pub target: PointCloud,
    pub truth: RigidTransform,
}

pub fn random_unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Uniform translation per axis, uniform axis, uniform angle.
pub fn random_motion(rng: &mut impl Rng, max_translation: f64, max_angle: f64) -> RigidTransform {
    let t = Vector3::from_fn(|_, _| rng.gen_range(-max_translation..=max_translation));
    let angle = rng.gen_range(0.0..=max_angle);
    let axis = random_unit_vector(rng);
    RigidTransform {
        rotation: exp_so3(&(axis * angle)),
        translation: t,
    }
}

/// Builds the seeded trial for `experiment` (`Servo` is not a registration
/// trial and is rejected).
pub fn make_trial(experiment: Experiment, seed: u64, limits: &TrialLimits) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = asymmetric_object(limits.samples, seed)?;
    let center = reference.centroid();
    let truth = random_motion(&mut rng, limits.max_translation, limits.max_angle);
    let moved = reference.transformed(&truth, &center);
    let target = match experiment {
        Experiment::C1 => moved,
        Experiment::C2 => {
            let mut view = None;
            for _ in 0..64 {
                let eye = moved.centroid() + random_unit_vector(&mut rng);
                let candidate = partial_view(&moved, &eye);
                if candidate.len() as f64 >= limits.min_retained * moved.len() as f64 {
                    view = Some(candidate);
                    break;
                }
            }
            view.ok_or_else(|| Error::Validation("no viewpoint keeps enough points".into()))?
        }
        Experiment::C3 => {
            let can = generate_shape(
                ShapeKind::Cylinder {
                    radius: 0.03,
                    height: 0.09,
                },
                limits.samples / 2,
                seed.wrapping_add(101),
            )?;
            let ball = generate_shape(ShapeKind::Sphere { radius: 0.035 }, limits.samples / 2, seed.wrapping_add(102))?;
            let origin = Vector3::zeros();
            let anchor = moved.centroid();
            let can = can.transformed(
                &RigidTransform::from_rotation_vector(
                    Vector3::new(0.5, 0.2, 0.0),
                    anchor + Vector3::new(0.11, 0.05, 0.0),
                ),
                &origin,
            );
            let ball = ball.transformed(
                &RigidTransform::from_translation(anchor + Vector3::new(-0.02, -0.12, -0.01)),
                &origin,
            );
            moved.merged(&can).merged(&ball)
        }
        Experiment::Servo => {
            return Err(Error::Validation("servo runs are not registration trials".into()));
        }
    };
    let target = add_position_noise(&target, limits.noise_sigma, seed.wrapping_add(7));
    Ok(Trial {
        experiment,
        seed,
        reference,
        target,
        truth,
    })
}

/// Outcome of one registration trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: Trial,
    pub alignment: Alignment,
    pub error: PoseError,
    pub elapsed: Duration,
}

impl TrialOutcome {
    pub fn per_iteration(&self) -> Duration {
        self.elapsed / self.alignment.iterations().max(1) as u32
    }
}

pub fn run_trial(trial: Trial, cfg: ControllerConfig) -> Result<TrialOutcome> {
    let start = Instant::now();
    let alignment = run_alignment(&trial.reference, &trial.target, cfg)?;
    let elapsed = start.elapsed();
    let error = PoseError::between(&trial.truth, &alignment.transform);
    Ok(TrialOutcome {
        trial,
        alignment,
        error,
        elapsed,
    })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
