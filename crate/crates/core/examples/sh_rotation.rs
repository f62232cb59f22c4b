//! Rotation-only alignment by ascending the SH correlation of two normal
//! histograms.

use nalgebra::{Matrix3, Vector3};
use spectral_servo::correlation::Correlator;
use spectral_servo::harmonics::RealShBasis;
use spectral_servo::servo::{rotation_features, Binning};
use spectral_servo::shapes::asymmetric_object;
use spectral_servo::transform::{exp_so3, geodesic_angle, RigidTransform};

fn main() -> spectral_servo::Result<()> {
    let reference = asymmetric_object(6000, 3)?;
    let center = reference.centroid();
    let truth = exp_so3(&(Vector3::new(0.3, -1.0, 0.6).normalize() * 40f64.to_radians()));
    let target = reference.transformed(&RigidTransform::from_rotation(truth), &center);

    let basis = RealShBasis::with_l_max(16, 15)?;
    let f = rotation_features(&reference, &basis, Binning::Linear, 0.4)?;
    let g = rotation_features(&target, &basis, Binning::Linear, 0.4)?;
    let correlator = Correlator::new(basis);
    let kappa = correlator.curvature(&f.sh).trace() / 3.0;

    let mut r = Matrix3::identity();
    for i in 0..=150 {
        let (c, grad) = correlator.evaluate(&f.sh, &g.sh, &r)?;
        if i % 15 == 0 {
            println!(
                "iter {i:3}  C = {c:.5}  |grad| = {:.2e}  error = {:.3} deg",
                grad.norm(),
                geodesic_angle(&r, &truth).to_degrees()
            );
        }
        r *= exp_so3(&(0.5 * grad / kappa));
    }
    Ok(())
}
