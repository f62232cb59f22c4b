//! Loading a run configuration, overriding keys, and writing it back.

use spectral_servo::config::RunConfig;

fn main() -> spectral_servo::Result<()> {
    let mut cfg = RunConfig::parse(
        "# trial setup\n\
         experiment = C2\n\
         seed = 11\n\
         dims = 64\n\
         lambda_r = 0.4\n",
    )?;
    cfg.apply_override("binning=nearest")?;
    cfg.apply_override("max_iters=500")?;
    print!("{}", cfg.to_text());
    Ok(())
}
