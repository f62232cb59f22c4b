//! Closed-loop positioning of a free-flying depth camera above a tabletop
//! scene.

use nalgebra::Vector3;
use spectral_servo::sim::{rotation_about, run_servo_sim, servo_config, Platform, Scenario, VirtualSensor};

fn main() -> spectral_servo::Result<()> {
    let scenario = Scenario::standard(3000, 2)?;
    let sensor = VirtualSensor::new(scenario.scene.clone());
    let start = scenario.displaced(
        Vector3::new(0.06, -0.04, 0.05),
        rotation_about(Vector3::new(1.0, 2.0, -0.5), 25f64.to_radians()),
    );
    let run = run_servo_sim(&sensor, &scenario.goal, &start, Platform::FreeFlying, servo_config())?;
    for s in run.trajectory.iter().step_by(10) {
        println!(
            "tick {:3}  Jt {:7.1}  Jr {:.4}  distance to goal {:.1} mm",
            s.tick,
            s.jt,
            s.jr,
            (s.pose.translation - scenario.goal.translation).norm() * 1e3
        );
    }
    println!(
        "{:?} after {} ticks: {:.2} mm, {:.3} deg, path {:.3} m",
        run.status,
        run.trajectory.len(),
        run.translation_error() * 1e3,
        run.rotation_error().to_degrees(),
        run.path_length()
    );
    Ok(())
}
