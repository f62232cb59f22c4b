use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-servo"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for name in ["a.xyz", "b.xyz"] {
        let out = run(dir.path(), &["gen", "--shape", "object", "--n", "800", "--seed", "4", "--out", name]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(dir.path().join("a.xyz")), read(dir.path().join("b.xyz")));
}

#[test]
fn gen_rejects_zero_samples_and_missing_source() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["gen", "--shape", "sphere", "--n", "0", "--out", "x.xyz"])), 3);
    assert_eq!(code(&run(dir.path(), &["gen", "--out", "x.xyz"])), 3);
    assert_eq!(code(&run(dir.path(), &["gen", "--shape", "box", "--size", "1,2", "--out", "x.xyz"])), 3);
    assert_eq!(code(&run(dir.path(), &["gen", "--shape", "sphere", "--radius", "-1", "--out", "x.xyz"])), 3);
}

#[test]
fn unknown_subcommand_is_usage_error_and_help_is_success() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 3);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
}

#[test]
fn register_identical_files_converges_at_identity() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "--shape", "object", "--n", "3000", "--out", "m.xyz"])), 0);
    let out = run(d, &["register", "--reference", "m.xyz", "--target", "m.xyz", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let t: Value = serde_json::from_str(&read(d.join("r/transform.json"))).unwrap();
    assert_eq!(t["iterations"], 1);
    assert_eq!(t["converged"], true);
    let rotation: Vec<f64> = t["rotation"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let identity = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert!(rotation.iter().zip(identity).all(|(a, b)| (a - b).abs() < 1e-12));
    assert_eq!(t["quaternion"].as_array().unwrap().len(), 4);
    assert!(t["translation"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap() == 0.0));
    assert!(t["Jt"].is_number() && t["Jr"].is_number());

    let trace = read(d.join("r/trace.csv"));
    assert_eq!(trace.lines().next().unwrap(), "iter,Jt,Jr,grad_t_norm,grad_cr_norm,tx,ty,tz,qw,qx,qy,qz");
    assert_eq!(trace.lines().count(), 2);
    assert!(read(d.join("r/summary.txt")).contains("status = converged"));

    let resolved = read(d.join("r/config.txt"));
    assert!(resolved.contains("lambda_t = 0.5"));
    assert!(resolved.contains("reference = m.xyz"));
}

#[test]
fn register_recovers_generated_trial() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "--experiment", "c1", "--seed", "2", "--out", "t"])), 0);
    let out = run(
        d,
        &["register", "--reference", "t/reference.xyz", "--target", "t/target.xyz", "--truth", "t/truth.json", "--out", "r"],
    );
    assert_eq!(code(&out), 0);
    let summary = stdout(&out);
    let value = |key: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .parse()
            .unwrap()
    };
    assert!(value("rotation_error_deg") < 5.0);
    assert!(value("translation_error_m") < 0.008 * 3f64.sqrt());
}

#[test]
fn register_config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "--experiment", "c1", "--seed", "1", "--out", "t"])), 0);
    std::fs::write(
        d.join("run.cfg"),
        "# registration\nreference = t/reference.xyz\ntarget = t/target.xyz\noutput = from_config\nmax_iters = 3\n",
    )
    .unwrap();
    let out = run(d, &["register", "--config", "run.cfg", "--set", "lambda_r=0.2"]);
    assert_eq!(code(&out), 2, "three iterations cannot converge");
    let summary = read(d.join("from_config/summary.txt"));
    assert!(summary.contains("status = max_iterations"));
    assert!(summary.contains("iterations = 3"));
    let resolved = read(d.join("from_config/config.txt"));
    assert!(resolved.contains("lambda_r = 0.2"));
    assert!(resolved.contains("max_iters = 3"));
}

#[test]
fn register_error_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "--shape", "sphere", "--n", "500", "--out", "s.xyz"])), 0);
    assert_eq!(code(&run(d, &["register", "--reference", "missing.xyz", "--target", "s.xyz", "--out", "r"])), 4);
    assert_eq!(code(&run(d, &["register", "--reference", "s.xyz", "--target", "s.xyz", "--set", "lambda_t=2"])), 3);
    assert_eq!(code(&run(d, &["register", "--reference", "s.xyz", "--target", "s.xyz", "--set", "nonsense"])), 3);
    assert_eq!(code(&run(d, &["register", "--target", "s.xyz"])), 3);
    std::fs::write(d.join("bad.xyz"), "0 0 0 0 0\n").unwrap();
    assert_eq!(code(&run(d, &["register", "--reference", "bad.xyz", "--target", "s.xyz"])), 3);
}

#[test]
fn servo_start_at_goal_writes_one_row() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = run(d, &["servo", "--n", "800", "--offset", "0,0,0,0,0,0", "--out", "s"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trajectory = read(d.join("s/trajectory.csv"));
    assert_eq!(trajectory.lines().next().unwrap(), "tick,tx,ty,tz,qw,qx,qy,qz,Jt,Jr");
    assert_eq!(trajectory.lines().count(), 2);
    assert_eq!(read(d.join("s/trace.csv")).lines().count(), 2);
    assert!(read(d.join("s/summary.txt")).contains("path_length_m = 0"));
    assert!(read(d.join("s/config.txt")).contains("experiment = servo"));
}

#[test]
fn servo_rejects_bad_poses() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["servo", "--offset", "1,2,3"])), 3);
    assert_eq!(code(&run(d, &["servo", "--start", "a,b,c,d,e,f"])), 3);
    assert_eq!(code(&run(d, &["servo", "--goal", "0,0,0,0,0,inf"])), 3);
}

#[test]
fn dump_single_normal_egi_has_one_bin() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("one.xyz"), "0.01 0.02 0.03 0 0 1\n0.02 0.02 0.03 0 0 1\n").unwrap();
    let out = run(d, &["dump", "--cloud", "one.xyz", "--what", "egi"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("16"));
    let nonzero: Vec<u64> = lines
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .filter(|&v| v != 0)
        .collect();
    assert_eq!(nonzero, vec![2]);
}

#[test]
fn dump_sphere_sh_is_dominated_by_degree_zero() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "--shape", "sphere", "--n", "20000", "--out", "s.xyz"])), 0);
    let out = run(d, &["dump", "--cloud", "s.xyz", "--what", "sh"]);
    assert_eq!(code(&out), 0);
    let rows: Vec<(usize, i64, f64)> = stdout(&out)
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let (l0, m0, c0) = rows[0];
    assert_eq!((l0, m0), (0, 0));
    assert!(rows[1..].iter().all(|r| r.2.abs() < c0.abs()));
}

#[test]
fn dump_voxels_header_and_selection_errors() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "--shape", "box", "--n", "500", "--out", "b.xyz"])), 0);
    let out = run(d, &["dump", "--cloud", "b.xyz", "--what", "voxels", "--set", "dims=32"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("32 32 32 0.008 "));
    assert_eq!(code(&run(d, &["dump", "--cloud", "b.xyz", "--what", ""])), 3);
    assert_eq!(code(&run(d, &["dump", "--cloud", "b.xyz"])), 3);
    assert_eq!(code(&run(d, &["dump", "--cloud", "nowhere.xyz", "--what", "egi"])), 4);
}

#[test]
fn bench_report_and_determinism() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["bench", "--iterations", "0"])), 3);
    let a = stdout(&run(d, &["bench", "--iterations", "3", "--seed", "5"]));
    let b = stdout(&run(d, &["bench", "--iterations", "3", "--seed", "5"]));
    for key in ["iterations = 3", "grid = 64x64x64", "bandwidth = 16", "l_max = 15", "mean_ms", "median_ms", "voxelize_ms", "fft_ms", "sh_ms", "gradient_ms"] {
        assert!(a.contains(key), "{key} missing from {a}");
    }
    let iterations = |s: &str| s.lines().find(|l| l.starts_with("iterations")).map(str::to_owned);
    assert_eq!(iterations(&a), iterations(&b));
}
