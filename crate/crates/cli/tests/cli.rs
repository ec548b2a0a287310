//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn urnsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urnsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const Z2_CONFIG: &str = r#"
seeds = [42]

[map]
kind = "convolution"

[map.group]
family = "cyclic"
n = 2

[initial]
counts = [1, 1]

[schedule]
kind = "unit"

[stop]
max_steps = 200

[output]
dir = "out"
stride = 1
"#;

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "z2.toml", Z2_CONFIG);
    let output = urnsim(&["simulate", "--config", &config, "--quiet"], dir.path());
    assert!(output.status.success(), "{output:?}");

    let csv_path = dir.path().join("out/trajectory_seed42.csv");
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# urnsim digest="));
    assert_eq!(lines.next().unwrap(), "n,k,count_0,count_1,p_0,p_1");
    // 200 unit steps at stride 1, plus the initial row.
    assert_eq!(text.lines().count(), 2 + 201);

    let summary = std::fs::read_to_string(dir.path().join("out/sweep_summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed["trajectories"].as_array().unwrap().len(), 1);
    assert_eq!(parsed["trajectories"][0]["seed"], 42);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "z2.toml", Z2_CONFIG);
    let a = urnsim(
        &["simulate", "--config", &config, "--quiet", "--out", "run_a"],
        dir.path(),
    );
    let b = urnsim(
        &["simulate", "--config", &config, "--quiet", "--out", "run_b"],
        dir.path(),
    );
    assert!(a.status.success() && b.status.success());
    let bytes_a = std::fs::read(dir.path().join("run_a/trajectory_seed42.csv")).unwrap();
    let bytes_b = std::fs::read(dir.path().join("run_b/trajectory_seed42.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn malformed_config_exits_2_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        r#"
[map]
kind = "genotype"
s = 1.5
t = 0.3

[initial]
counts = [1, 1]

[schedule]
kind = "unit"
"#,
    );
    let output = urnsim(&["simulate", "--config", &bad], dir.path());
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("fitness"), "stderr: {stderr}");
}

#[test]
fn missing_config_and_bad_toml_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = urnsim(&["verify", "--config", "nope.toml"], dir.path());
    assert_eq!(output.status.code(), Some(2));

    let garbled = write_config(dir.path(), "garbled.toml", "this is not toml [");
    let output = urnsim(&["verify", "--config", &garbled], dir.path());
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn print_defaults_round_trips_as_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let output = urnsim(&["print-defaults"], dir.path());
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let config = write_config(dir.path(), "defaults.toml", &text);
    let check = urnsim(&["fixed-points", "--config", &config], dir.path());
    assert!(check.status.success(), "{check:?}");
}

#[test]
fn fixed_points_lists_z4_supports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "z4.toml",
        r#"
[map]
kind = "convolution"

[map.group]
family = "cyclic"
n = 4

[initial]
counts = [1, 1, 1, 1]

[schedule]
kind = "unit"
"#,
    );
    let output = urnsim(&["fixed-points", "--config", &config], dir.path());
    assert!(output.status.success());
    let parsed: serde_json::Value =
        serde_json::from_slice(&output.stdout).unwrap();
    let points = parsed["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    assert_eq!(parsed["attracting_index"], 2);
    let supports: Vec<usize> = points
        .iter()
        .map(|p| p["support"].as_array().unwrap().len())
        .collect();
    assert_eq!(supports, vec![1, 2, 4]);
}

#[test]
fn verify_passes_s3_and_fails_degenerate_maps() {
    let dir = tempfile::tempdir().unwrap();
    let s3 = write_config(
        dir.path(),
        "s3.toml",
        r#"
[map]
kind = "convolution"

[map.group]
family = "symmetric"
n = 3

[initial]
counts = { "213" = 1, "231" = 1 }

[schedule]
kind = "unit"
"#,
    );
    let output = urnsim(&["verify", "--config", &s3, "--quiet"], dir.path());
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed["all_pass"], true);

    let neutral = write_config(
        dir.path(),
        "neutral.toml",
        r#"
[map]
kind = "genotype"
s = 0.0
t = 0.0

[initial]
counts = [3, 7]

[schedule]
kind = "unit"
"#,
    );
    let output = urnsim(&["verify", "--config", &neutral, "--quiet"], dir.path());
    assert_eq!(output.status.code(), Some(1), "A1 fails for the identity map");
}

#[test]
fn verify_fails_a3_for_fast_geometric_growth() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fast.toml",
        r#"
[map]
kind = "convolution"

[map.group]
family = "cyclic"
n = 2

[initial]
counts = [1, 1]

[schedule]
kind = "geometric"
ratio = 2.0
"#,
    );
    let output = urnsim(&["verify", "--config", &config, "--quiet"], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let a3 = &parsed["reports"][2];
    assert_eq!(a3["condition"], "A3");
    assert_eq!(a3["pass"], false);
}

#[test]
fn diagnose_accepts_healthy_run_and_flags_absorbed_one() {
    let dir = tempfile::tempdir().unwrap();
    let healthy = write_config(
        dir.path(),
        "healthy.toml",
        r#"
seeds = [5]

[map]
kind = "convolution"

[map.group]
family = "cyclic"
n = 2

[initial]
counts = [1, 1]

[schedule]
kind = "unit"

[stop]
max_steps = 30000

[output]
dir = "healthy_out"
stride = 1
"#,
    );
    let sim = urnsim(&["simulate", "--config", &healthy, "--quiet"], dir.path());
    assert!(sim.status.success());
    let diag = urnsim(
        &[
            "diagnose",
            "--config",
            &healthy,
            "--quiet",
            "healthy_out/trajectory_seed5.csv",
        ],
        dir.path(),
    );
    assert_eq!(diag.status.code(), Some(0), "{diag:?}");
    let parsed: serde_json::Value = serde_json::from_slice(&diag.stdout).unwrap();
    assert_eq!(parsed[0]["drift_violations"].as_array().unwrap().len(), 0);
    assert_eq!(parsed[0]["verdict"]["converged"], true);

    // An urn absorbed at a point mass never converges to the uniform target.
    let absorbed = write_config(
        dir.path(),
        "absorbed.toml",
        r#"
seeds = [5]

[map]
kind = "convolution"

[map.group]
family = "cyclic"
n = 2

[initial]
counts = [4, 0]

[schedule]
kind = "unit"

[stop]
max_steps = 500

[output]
dir = "absorbed_out"
stride = 1
"#,
    );
    let sim = urnsim(&["simulate", "--config", &absorbed, "--quiet"], dir.path());
    assert!(sim.status.success());
    let diag = urnsim(
        &[
            "diagnose",
            "--config",
            &absorbed,
            "--quiet",
            "absorbed_out/trajectory_seed5.csv",
        ],
        dir.path(),
    );
    assert_eq!(diag.status.code(), Some(1));
    let parsed: serde_json::Value = serde_json::from_slice(&diag.stdout).unwrap();
    assert_eq!(parsed[0]["verdict"]["converged"], false);
}

#[test]
fn seed_overrides_control_output_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "z2.toml", Z2_CONFIG);
    let output = urnsim(
        &[
            "simulate",
            "--config",
            &config,
            "--quiet",
            "--seed-range",
            "1..3",
            "--out",
            "ranged",
        ],
        dir.path(),
    );
    assert!(output.status.success());
    for seed in 1..=3 {
        assert!(dir
            .path()
            .join(format!("ranged/trajectory_seed{seed}.csv"))
            .exists());
    }
    assert!(!dir.path().join("ranged/trajectory_seed42.csv").exists());
}
