//! Recovers a known shift between two voxelized copies of a cloud.

use nalgebra::Vector3;
use spectral_servo::shapes::asymmetric_object;
use spectral_servo::transform::RigidTransform;
use spectral_servo::translation::{phase_correlate_with, Fft3, PeakOptions};
use spectral_servo::voxel::{voxelize, GridSpec, DEFAULT_DIM, DEFAULT_RESOLUTION};

fn main() -> spectral_servo::Result<()> {
    let reference = asymmetric_object(6000, 1)?;
    let center = reference.centroid();
    let shift = Vector3::new(0.024, -0.016, 0.040);
    let target = reference.transformed(&RigidTransform::from_translation(shift), &center);

    let spec = GridSpec::centered(&center, DEFAULT_RESOLUTION, [DEFAULT_DIM; 3])?;
    let fft = Fft3::new(spec.dims());
    let f = fft.forward(&voxelize(&reference, &spec)?);
    let g = fft.forward(&voxelize(&target, &spec)?);

    for subvoxel in [false, true] {
        let est = phase_correlate_with(&fft, &f, &g, PeakOptions { subvoxel })?;
        println!(
            "subvoxel={subvoxel}: grad_t = {:.4?} (expected {:.4?}), peak {:.3} at {:?}",
            est.grad_t.as_slice(),
            (-shift).as_slice(),
            est.peak_value,
            est.peak_index
        );
    }
    Ok(())
}
