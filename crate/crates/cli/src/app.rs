//! Subcommand bodies, independent of argument parsing.

use std::fs;
use std::path::{Path, PathBuf};

use rendezvous_core::sim::{RunOptions, Simulation, TrajectoryLog};
use rendezvous_core::{build_topology, has_rooted_spanning_tree, Error, ScenarioConfig};

use crate::error::{CliError, Result};
use crate::export::{export_trajectory, read_trajectory, DISTANCES_FILE, TRAJECTORY_FILE};
use crate::plots::emit_plot_script;
use crate::report::{MetricsReport, METRICS_FILE};
use crate::scenario::{parse_scenario, write_scenario};

/// Resolved scenario written next to each run's exports.
pub const RESOLVED_SCENARIO_FILE: &str = "scenario.toml";

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub log: TrajectoryLog,
    pub report: MetricsReport,
}

/// Simulates `cfg` and writes the trajectory, distances, resolved scenario
/// and metrics into `out_dir`. Under `strict` the run stops at the first
/// monitor violation and the result is an error once the files are written.
pub fn run_config(cfg: ScenarioConfig, out_dir: &Path, strict: bool) -> Result<RunSummary> {
    let sim = Simulation::new(cfg.clone())?;
    let log = sim.run(RunOptions {
        stop_on_violation: strict,
    })?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    export_trajectory(&log, out_dir)?;
    write_scenario(&cfg, &out_dir.join(RESOLVED_SCENARIO_FILE))?;
    let report = MetricsReport::from_log(&log)?;
    report.write(&out_dir.join(METRICS_FILE))?;
    if strict {
        if let Some(first) = log.violations().next() {
            return Err(CliError::Violation {
                count: log.violations().count(),
                first: format!("step {} (t={}): {:?}", first.step, first.time, first.kind),
            });
        }
    }
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        log,
        report,
    })
}

pub fn run_scenario(path: &Path, out_dir: &Path, strict: bool) -> Result<RunSummary> {
    run_config(parse_scenario(path)?, out_dir, strict)
}

/// Parses and validates a scenario and checks that the informed robot
/// roots a spanning tree of the initial sensing graph.
pub fn check_scenario(path: &Path) -> Result<ScenarioConfig> {
    let cfg = parse_scenario(path)?;
    let root = cfg.informed_id().unwrap_or(1);
    let topology = build_topology(&cfg.initial_states, cfg.sensing_radius);
    if !has_rooted_spanning_tree(&topology, root) {
        return Err(Error::NoSpanningTree { root }.into());
    }
    Ok(cfg)
}

/// Accepts a run directory or any file inside one.
fn run_dir(path: &Path) -> &Path {
    if path.is_dir() {
        path
    } else {
        path.parent().unwrap_or(Path::new("."))
    }
}

/// Recomputes the metrics of an exported run from its files.
pub fn metrics_for_dir(path: &Path) -> Result<MetricsReport> {
    let dir = run_dir(path);
    let cfg = parse_scenario(&dir.join(RESOLVED_SCENARIO_FILE))?;
    let log = read_trajectory(dir, &cfg)?;
    MetricsReport::from_log(&log)
}

/// Writes `plots.py` for an exported run.
pub fn plots_for_dir(path: &Path) -> Result<PathBuf> {
    let dir = run_dir(path);
    let cfg = parse_scenario(&dir.join(RESOLVED_SCENARIO_FILE))?;
    let inputs = [dir.join(TRAJECTORY_FILE), dir.join(DISTANCES_FILE)];
    emit_plot_script(&inputs, dir, cfg.sensing_radius)
}
