//! `metrics.json`: run summary derived from the trajectory log.

use std::fs;
use std::path::Path;

use rendezvous_core::sim::{compute_metrics, TrajectoryLog};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const METRICS_FILE: &str = "metrics.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    pub converged: bool,
    pub aborted: bool,
    pub records: usize,
    pub final_time: f64,
    /// Meters, one per robot.
    pub final_position_errors: Vec<f64>,
    /// Radians, one per robot.
    pub final_heading_errors: Vec<f64>,
    pub min_distance_collision_free: Option<f64>,
    pub max_tree_edge_distance: Option<f64>,
    pub switch_time: Option<f64>,
    /// 1/s, fitted on the informed robot's heading error.
    pub heading_decay_rate: Option<f64>,
    pub max_potential_increase: f64,
    pub violations: usize,
}

impl MetricsReport {
    pub fn from_log(log: &TrajectoryLog) -> Result<Self> {
        let m = compute_metrics(log)?;
        Ok(MetricsReport {
            format_version: 1,
            converged: log.converged,
            aborted: log.aborted,
            records: log.records.len(),
            final_time: m.final_time,
            final_position_errors: m.final_position_errors,
            final_heading_errors: m.final_heading_errors,
            min_distance_collision_free: m.min_distance_collision_free,
            max_tree_edge_distance: m.max_tree_edge_distance,
            switch_time: m.switch_time,
            heading_decay_rate: m.heading_decay_rate,
            max_potential_increase: m.max_potential_increase,
            violations: log.violations().count(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize to JSON")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
    }
}
