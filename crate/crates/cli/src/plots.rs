//! Emits a matplotlib script that draws the run from its exported files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::export::{DISTANCES_FILE, TRAJECTORY_FILE};

pub const PLOT_SCRIPT_FILE: &str = "plots.py";

const TEMPLATE: &str = r##"#!/usr/bin/env python3
# format_version=1
# Reads the exported files next to this script and writes
# trajectories.png, distances.png and heading_error.png beside them.
import csv
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
TRAJECTORY = "@TRAJECTORY@"
DISTANCES = "@DISTANCES@"
SENSING_RADIUS = @SENSING_RADIUS@


def rows(name):
    with open(os.path.join(HERE, name), newline="") as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


traj = rows(TRAJECTORY)
dist = rows(DISTANCES)
robots = sorted({int(r["id"]) for r in traj})
by_robot = {i: [r for r in traj if int(r["id"]) == i] for i in robots}
switch = next((float(r["t"]) for r in traj if r["region"] == "rendezvous"), None)

# trajectories with start and end headings
fig, ax = plt.subplots(figsize=(7, 6))
for i in robots:
    rs = by_robot[i]
    xs = [float(r["x"]) for r in rs]
    ys = [float(r["y"]) for r in rs]
    style = "-" if i == 1 else "-."
    label = "IR %d" % i if i == 1 else "FR %d" % i
    (line,) = ax.plot(xs, ys, style, label=label)
    for r in (rs[0], rs[-1]):
        th = float(r["theta"])
        ax.annotate(
            "",
            xy=(float(r["x"]) + 0.3 * math.cos(th), float(r["y"]) + 0.3 * math.sin(th)),
            xytext=(float(r["x"]), float(r["y"])),
            arrowprops=dict(arrowstyle="->", color=line.get_color()),
        )
ax.set_xlabel("x [m]")
ax.set_ylabel("y [m]")
ax.set_aspect("equal", adjustable="datalim")
ax.legend()
fig.savefig(os.path.join(HERE, "trajectories.png"), dpi=120)

# distance along each monitored edge
fig, ax = plt.subplots(figsize=(7, 4))
edges = sorted({(int(r["i"]), int(r["j"])) for r in dist})
for e in edges:
    rs = [r for r in dist if (int(r["i"]), int(r["j"])) == e]
    ax.plot([float(r["t"]) for r in rs], [float(r["d"]) for r in rs], label="d%d%d" % e)
ax.axhline(SENSING_RADIUS, color="k", linestyle="--", linewidth=0.8)
if switch is not None:
    ax.axvline(switch, color="grey", linestyle=":", linewidth=0.8)
ax.set_xlabel("t [s]")
ax.set_ylabel("distance [m]")
ax.legend()
fig.savefig(os.path.join(HERE, "distances.png"), dpi=120)

# heading error on a log scale
fig, ax = plt.subplots(figsize=(7, 4))
for i in robots:
    pts = [(float(r["t"]), abs(float(r["theta_err"]))) for r in by_robot[i]]
    pts = [(t, e) for t, e in pts if e > 0.0]
    ax.semilogy([t for t, _ in pts], [e for _, e in pts], label="robot %d" % i)
if switch is not None:
    ax.axvline(switch, color="grey", linestyle=":", linewidth=0.8)
ax.set_xlabel("t [s]")
ax.set_ylabel("|heading error| [rad]")
ax.legend()
fig.savefig(os.path.join(HERE, "heading_error.png"), dpi=120)
"##;

fn file_name(path: &Path) -> Option<&str> {
    path.file_name().and_then(|n| n.to_str())
}

/// Writes `plots.py` into `out_dir`. Every input must already exist inside
/// `out_dir`, and the trajectory and distance files must both be among
/// them; the script refers to them by file name only.
pub fn emit_plot_script(
    inputs: &[PathBuf],
    out_dir: &Path,
    sensing_radius: f64,
) -> Result<PathBuf> {
    if inputs.is_empty() {
        return Err(CliError::MissingInput("no exported files given".into()));
    }
    for p in inputs {
        if !p.is_file() {
            return Err(CliError::MissingInput(format!(
                "{} does not exist",
                p.display()
            )));
        }
        let inside = p
            .parent()
            .zip(fs::canonicalize(out_dir).ok())
            .is_some_and(|(parent, dir)| fs::canonicalize(parent).is_ok_and(|c| c == dir));
        if !inside {
            return Err(CliError::MissingInput(format!(
                "{} is not in {}",
                p.display(),
                out_dir.display()
            )));
        }
    }
    let find = |name: &str| {
        inputs
            .iter()
            .find(|p| file_name(p) == Some(name))
            .ok_or_else(|| CliError::MissingInput(format!("{name} is required")))
    };
    find(TRAJECTORY_FILE)?;
    find(DISTANCES_FILE)?;
    let script = TEMPLATE
        .replace("@TRAJECTORY@", TRAJECTORY_FILE)
        .replace("@DISTANCES@", DISTANCES_FILE)
        .replace("@SENSING_RADIUS@", &format!("{sensing_radius:?}"));
    let path = out_dir.join(PLOT_SCRIPT_FILE);
    fs::write(&path, script).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
