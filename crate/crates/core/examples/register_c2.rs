//! Registration trials of the C2 kind over a few seeds.
//!
//! Usage: `cargo run --release --example register_c2 -- [seeds]`

use spectral_servo::experiments::{make_trial, run_trial, Experiment, TrialLimits};
use spectral_servo::servo::ControllerConfig;

fn main() -> spectral_servo::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for seed in 0..seeds {
        let trial = make_trial(Experiment::C2, seed, &TrialLimits::default())?;
        let (reference, target) = (trial.reference.len(), trial.target.len());
        let o = run_trial(trial, ControllerConfig::default())?;
        println!(
            "seed {seed:2}: {reference} -> {target} points, {:?} after {:3} iterations, error {:.2} mm / {:.2} deg, {:.1} ms/iter",
            o.alignment.status,
            o.alignment.iterations(),
            o.error.translation.norm() * 1e3,
            o.error.angle().to_degrees(),
            o.per_iteration().as_secs_f64() * 1e3
        );
    }
    Ok(())
}
