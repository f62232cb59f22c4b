//! Closed-loop positioning of an eye-in-hand camera on a 7-joint arm; each
//! tick's camera twist becomes joint velocities through the Jacobian
//! pseudo-inverse.

use nalgebra::Vector3;
use spectral_servo::sim::{rotation_about, run_servo_sim, servo_config, Platform, Scenario, VirtualSensor};

fn main() -> spectral_servo::Result<()> {
    let scenario = Scenario::standard(3000, 5)?;
    let sensor = VirtualSensor::new(scenario.scene.clone()).with_noise(0.0005, 5);
    let start = scenario.displaced(
        Vector3::new(-0.05, 0.06, 0.03),
        rotation_about(Vector3::new(-1.0, 0.5, 1.0), 20f64.to_radians()),
    );
    let arm = scenario.arm_at(&start)?;
    println!("start joints {:.3?}", arm.q);
    let run = run_servo_sim(&sensor, &scenario.goal, &start, Platform::Arm(arm), servo_config())?;
    println!(
        "{:?} after {} ticks: {:.2} mm, {:.3} deg",
        run.status,
        run.trajectory.len(),
        run.translation_error() * 1e3,
        run.rotation_error().to_degrees()
    );
    if let Some(q) = &run.final_joints {
        println!("final joints {q:.3?}");
    }
    std::fs::write("servo_arm_trajectory.csv", run.trajectory_csv()).expect("write trajectory");
    Ok(())
}
