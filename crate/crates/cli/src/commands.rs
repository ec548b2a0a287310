//! Subcommand implementations. Each returns an exit code: 0 for success,
//! 1 for runtime or check/diagnostic failures, 2 for invalid input.

use std::path::{Path, PathBuf};

use serde::Serialize;

use urnsim::checks::{check_a1, check_a2, check_a3, CheckError, ConditionReport};
use urnsim::diagnostics::{
    convergence_verdict, robbins_siegmund_monitor, ConvergenceVerdict, MonitorOptions,
};
use urnsim::engine::run_sweep;
use urnsim::io::{read_trajectory_file, write_trajectory_file};
use urnsim::simplex::{fixed_point_infos, FixedPointInfo};

use crate::config::{ExperimentConfig, ResolvedExperiment};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Command-level error, carrying the exit code distinction.
#[derive(Debug, thiserror::Error)]
pub enum CmdError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => EXIT_INVALID,
            Self::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl From<crate::config::ConfigError> for CmdError {
    fn from(e: crate::config::ConfigError) -> Self {
        Self::Invalid(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CmdError {
    CmdError::Runtime(e.to_string())
}

fn resolve(config: &ExperimentConfig) -> Result<ResolvedExperiment, CmdError> {
    Ok(config.resolve()?)
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    steps: usize,
    terminal_k: u64,
    terminal_p: Vec<f64>,
    /// Total variation distance to the map's attracting fixed point, when
    /// the map designates one.
    tv_to_q0: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary {
    digest: String,
    map: String,
    schedule: String,
    labels: Vec<String>,
    trajectories: Vec<SeedSummary>,
}

pub fn trajectory_file_name(seed: u64) -> String {
    format!("trajectory_seed{seed}.csv")
}

/// Runs the sweep and writes one CSV per seed plus a summary.
pub fn cmd_simulate(config: &ExperimentConfig, quiet: bool) -> Result<i32, CmdError> {
    let experiment = resolve(config)?;
    let trajectories =
        run_sweep(&experiment.run_config, &experiment.seeds).map_err(runtime)?;
    let out_dir = PathBuf::from(&config.output.dir);
    std::fs::create_dir_all(&out_dir).map_err(runtime)?;

    let q0 = experiment
        .map
        .fixed_points()
        .ok()
        .and_then(|fps| fps.attracting_point().cloned());
    let mut summaries = Vec::new();
    for trajectory in &trajectories {
        let path = out_dir.join(trajectory_file_name(trajectory.seed));
        write_trajectory_file(&path, trajectory, &experiment.digest).map_err(runtime)?;
        let terminal = trajectory.terminal_p();
        let summary = SeedSummary {
            seed: trajectory.seed,
            steps: trajectory.steps(),
            terminal_k: trajectory.terminal().total,
            terminal_p: terminal.weights().to_vec(),
            tv_to_q0: q0.as_ref().map(|q| terminal.tv_distance(q)),
        };
        if !quiet {
            println!(
                "seed {:>6}  steps {:>8}  k {:>10}  tv_to_q0 {}",
                summary.seed,
                summary.steps,
                summary.terminal_k,
                summary
                    .tv_to_q0
                    .map_or("n/a".to_string(), |d| format!("{d:.6}")),
            );
        }
        summaries.push(summary);
    }

    let summary = SweepSummary {
        digest: experiment.digest.clone(),
        map: experiment.map.describe(),
        schedule: experiment.schedule.describe(),
        labels: experiment.labels.clone(),
        trajectories: summaries,
    };
    let summary_path = out_dir.join("sweep_summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).map_err(runtime)?,
    )
    .map_err(runtime)?;
    if !quiet {
        println!(
            "wrote {} trajectories and {}",
            trajectories.len(),
            summary_path.display()
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FixedPointsOutput {
    map: String,
    attracting_index: Option<usize>,
    points: Vec<FixedPointInfo>,
}

/// Prints the fixed point set of the configured map as JSON.
pub fn cmd_fixed_points(config: &ExperimentConfig) -> Result<i32, CmdError> {
    let map = config.build_map()?;
    let fps = map.fixed_points().map_err(|e| CmdError::Invalid(e.to_string()))?;
    let output = FixedPointsOutput {
        map: map.describe(),
        attracting_index: fps.attracting,
        points: fixed_point_infos(&map, &fps),
    };
    println!("{}", serde_json::to_string_pretty(&output).map_err(runtime)?);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyOutput {
    map: String,
    schedule: String,
    reports: Vec<ConditionReport>,
    all_pass: bool,
}

/// Runs the A1/A2/A3 checkers and reports pass/fail.
///
/// A failed hypothesis (`InitialMassZero`) is a check failure, not invalid
/// input: the configuration is well-formed, the theorem just does not apply.
pub fn cmd_verify(config: &ExperimentConfig, quiet: bool) -> Result<i32, CmdError> {
    let experiment = resolve(config)?;
    let fps = experiment
        .map
        .fixed_points()
        .map_err(|e| CmdError::Invalid(e.to_string()))?;

    let mut reports = Vec::new();
    let a1 = match check_a1(&experiment.map, &fps, &config.checkers.a1_options()) {
        Ok(report) => report,
        Err(e @ CheckError::NoAttractingPoint) => return Err(CmdError::Invalid(e.to_string())),
        Err(e) => return Err(runtime(e)),
    };
    reports.push(a1);
    let a2 = match check_a2(
        &experiment.map,
        &fps,
        &experiment.p0,
        &config.checkers.a2_options(),
    ) {
        Ok(report) => report,
        Err(e @ CheckError::InitialMassZero { .. }) => {
            eprintln!("A2 hypothesis fails: {e}");
            return Ok(EXIT_FAILURE);
        }
        Err(e) => return Err(runtime(e)),
    };
    reports.push(a2);
    reports.push(check_a3(
        &experiment.schedule,
        &fps,
        config.checkers.a3_horizon,
    ));

    let all_pass = reports.iter().all(|r| r.pass);
    let output = VerifyOutput {
        map: experiment.map.describe(),
        schedule: experiment.schedule.describe(),
        reports,
        all_pass,
    };
    println!("{}", serde_json::to_string_pretty(&output).map_err(runtime)?);
    if !quiet {
        for report in &output.reports {
            eprintln!(
                "{}: {}  worst {}",
                report.condition,
                if report.pass { "pass" } else { "FAIL" },
                report.worst_value
            );
        }
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct DiagnoseOutput {
    file: String,
    seed: u64,
    drift_checkpoints: usize,
    drift_violations: Vec<usize>,
    sum_xi: f64,
    verdict: ConvergenceVerdict,
}

/// Replays trajectory files against the drift bound and the convergence
/// surrogate. Exit 1 when any drift violation or non-convergence shows up.
pub fn cmd_diagnose(
    config: &ExperimentConfig,
    files: &[PathBuf],
    quiet: bool,
) -> Result<i32, CmdError> {
    if files.is_empty() {
        return Err(CmdError::Invalid("no trajectory files given".into()));
    }
    let experiment = resolve(config)?;
    let fps = experiment
        .map
        .fixed_points()
        .map_err(|e| CmdError::Invalid(e.to_string()))?;
    let target = fps
        .contraction_candidate()
        .map(|i| fps.points[i].clone())
        .ok_or_else(|| {
            CmdError::Invalid("map designates no fixed point to diagnose against".into())
        })?;

    let mut outputs = Vec::new();
    let mut healthy = true;
    for file in files {
        let (trajectory, digest) = read_trajectory_file(file)
            .map_err(|e| CmdError::Invalid(format!("{}: {e}", file.display())))?;
        if digest != experiment.digest {
            eprintln!(
                "note: {} was produced under digest {digest}, config digest is {}",
                file.display(),
                experiment.digest
            );
        }
        let monitor = robbins_siegmund_monitor(
            &trajectory,
            &experiment.map,
            &target,
            &MonitorOptions::default(),
        );
        let verdict = convergence_verdict(
            &trajectory,
            &target,
            config.convergence.threshold,
            config.convergence.window,
        );
        healthy &= monitor.violation_steps.is_empty() && verdict.converged;
        outputs.push(DiagnoseOutput {
            file: file.display().to_string(),
            seed: trajectory.seed,
            drift_checkpoints: monitor.records.len(),
            drift_violations: monitor.violation_steps.clone(),
            sum_xi: monitor.sum_xi,
            verdict,
        });
    }
    println!("{}", serde_json::to_string_pretty(&outputs).map_err(runtime)?);
    if !quiet {
        for output in &outputs {
            eprintln!(
                "{}: drift checkpoints {}, violations {}, converged {}",
                output.file,
                output.drift_checkpoints,
                output.drift_violations.len(),
                output.verdict.converged
            );
        }
    }
    Ok(if healthy { EXIT_OK } else { EXIT_FAILURE })
}

/// Prints the fully populated default configuration.
pub fn cmd_print_defaults() -> i32 {
    print!("{}", ExperimentConfig::default().to_toml());
    EXIT_OK
}

/// Applies command-line overrides onto a loaded config.
pub fn apply_overrides(
    config: &mut ExperimentConfig,
    seeds: Option<&str>,
    seed_range: Option<&str>,
    out: Option<&Path>,
    stride: Option<usize>,
) -> Result<(), CmdError> {
    if let Some(list) = seeds {
        let parsed: Result<Vec<u64>, _> = list.split(',').map(|s| s.trim().parse()).collect();
        config.seeds =
            parsed.map_err(|e| CmdError::Invalid(format!("--seeds {list:?}: {e}")))?;
    }
    if let Some(range) = seed_range {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| CmdError::Invalid(format!("--seed-range {range:?}: expected N..M")))?;
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|e| CmdError::Invalid(format!("--seed-range start: {e}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|e| CmdError::Invalid(format!("--seed-range end: {e}")))?;
        if hi < lo {
            return Err(CmdError::Invalid(format!(
                "--seed-range {range:?} is empty"
            )));
        }
        config.seeds = (lo..=hi).collect(); // inclusive on both ends
    }
    if let Some(dir) = out {
        config.output.dir = dir.display().to_string();
    }
    if let Some(stride) = stride {
        config.output.stride = stride;
    }
    Ok(())
}
