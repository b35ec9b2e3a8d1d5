//! CSV trajectory and distance files.
//!
//! Both files open with a `# format_version=1` comment line followed by a
//! fixed header. Floats are written in scientific notation with ten
//! significant digits.
//!
//! `trajectory.csv`, one row per (step, robot):
//! `t,id,x,y,theta,v,omega,phi,region,theta_d,theta_err,theta_d_dot`
//!
//! `distances.csv`, one row per (step, monitored tree edge):
//! `t,i,j,d`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rendezvous_core::controller::ControlOutput;
use rendezvous_core::graph::EdgeMargin;
use rendezvous_core::sim::{
    monitor_invariants, pair_distances, Event, EventKind, StepRecord, TrajectoryLog,
};
use rendezvous_core::{Region, RobotState, Role, ScenarioConfig, Vec2};

use crate::error::{CliError, Result};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DISTANCES_FILE: &str = "distances.csv";
pub const FORMAT_LINE: &str = "# format_version=1";

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "t",
    "id",
    "x",
    "y",
    "theta",
    "v",
    "omega",
    "phi",
    "region",
    "theta_d",
    "theta_err",
    "theta_d_dot",
];
pub const DISTANCES_HEADER: [&str; 4] = ["t", "i", "j", "d"];

fn num(x: f64) -> String {
    format!("{x:.9e}")
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::parse(path, e)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{FORMAT_LINE}").map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(out))
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trajectory(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in &log.records {
        let t = num(r.time);
        for ((s, c), phi) in r.states.iter().zip(&r.controls).zip(&r.potentials) {
            w.write_record([
                t.clone(),
                s.id.to_string(),
                num(s.position.x),
                num(s.position.y),
                num(s.heading),
                num(c.v),
                num(c.omega),
                num(*phi),
                r.region.as_str().to_string(),
                num(c.desired_heading),
                num(c.heading_error),
                num(c.desired_heading_rate),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

pub fn write_distances(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DISTANCES_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in &log.records {
        let t = num(r.time);
        for m in &r.edge_margins {
            w.write_record([
                t.clone(),
                m.edge.0.to_string(),
                m.edge.1.to_string(),
                num(m.distance),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// Writes both files into `dir` and returns their paths.
pub fn export_trajectory(log: &TrajectoryLog, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if log.records.is_empty() {
        return Err(rendezvous_core::Error::EmptyLog.into());
    }
    let traj = dir.join(TRAJECTORY_FILE);
    let dist = dir.join(DISTANCES_FILE);
    write_trajectory(log, &traj)?;
    write_distances(log, &dist)?;
    Ok((traj, dist))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::parse(
            path,
            format!(
                "unexpected header {:?}, expected {:?}",
                header.iter().collect::<Vec<_>>(),
                expected
            ),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, k: usize) -> Result<T> {
    let line = row.position().map_or(0, |p| p.line());
    row.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::parse(path, format!("line {line}: bad value in column {}", k + 1)))
}

fn parse_region(path: &Path, s: &str) -> Result<Region> {
    match s {
        "collision_free" => Ok(Region::CollisionFree),
        "rendezvous" => Ok(Region::Rendezvous),
        other => Err(CliError::parse(path, format!("unknown region `{other}`"))),
    }
}

/// Rebuilds a log from the two exported files. Pair distances, monitor
/// events and the convergence flag are recomputed from the positions.
pub fn read_trajectory(dir: &Path, cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    let traj = dir.join(TRAJECTORY_FILE);
    let dist = dir.join(DISTANCES_FILE);
    let n = cfg.n;

    let mut rdr = reader(&traj)?;
    check_header(&traj, &mut rdr, &TRAJECTORY_HEADER)?;
    let mut records: Vec<StepRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&traj, e))?;
        let time: f64 = field(&traj, &row, 0)?;
        let id: usize = field(&traj, &row, 1)?;
        let region = parse_region(&traj, row.get(8).unwrap_or(""))?;
        let starts_record = records.last().is_none_or(|r| r.states.len() == n);
        if starts_record {
            records.push(StepRecord {
                step: records.len(),
                time,
                region,
                states: Vec::with_capacity(n),
                controls: Vec::with_capacity(n),
                potentials: Vec::with_capacity(n),
                distances: Vec::new(),
                edge_margins: Vec::new(),
                events: Vec::new(),
            });
        }
        let record = records.last_mut().expect("record pushed above");
        if id != record.states.len() + 1 || record.time != time {
            return Err(CliError::parse(
                &traj,
                format!("rows out of order at t={time}, id={id}"),
            ));
        }
        let role = if id == 1 {
            Role::Informed
        } else {
            Role::Follower
        };
        record.states.push(RobotState::new(
            id,
            Vec2::new(field(&traj, &row, 2)?, field(&traj, &row, 3)?),
            field(&traj, &row, 4)?,
            role,
        ));
        record.controls.push(ControlOutput {
            v: field(&traj, &row, 5)?,
            omega: field(&traj, &row, 6)?,
            desired_heading: field(&traj, &row, 9)?,
            heading_error: field(&traj, &row, 10)?,
            desired_heading_rate: field(&traj, &row, 11)?,
            heading_held: false,
        });
        record.potentials.push(field(&traj, &row, 7)?);
    }
    if records.last().is_some_and(|r| r.states.len() != n) {
        return Err(CliError::parse(&traj, "last record is incomplete"));
    }

    let mut rdr = reader(&dist)?;
    check_header(&dist, &mut rdr, &DISTANCES_HEADER)?;
    let mut tree_edges = Vec::new();
    let mut cursor = 0usize;
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&dist, e))?;
        let time: f64 = field(&dist, &row, 0)?;
        let edge = (field(&dist, &row, 1)?, field(&dist, &row, 2)?);
        let distance: f64 = field(&dist, &row, 3)?;
        while cursor < records.len() && records[cursor].time < time {
            cursor += 1;
        }
        let Some(record) = records.get_mut(cursor).filter(|r| r.time == time) else {
            return Err(CliError::parse(
                &dist,
                format!("no trajectory record at t={time}"),
            ));
        };
        if cursor == 0 {
            tree_edges.push(edge);
        }
        record.edge_margins.push(EdgeMargin {
            edge,
            distance,
            margin: cfg.sensing_radius - distance,
            in_escape_ring: distance > cfg.sensing_radius - cfg.connectivity_buffer,
        });
    }

    let mut previous = None;
    for r in &mut records {
        r.distances = pair_distances(&r.states);
        let mut events = monitor_invariants(r, cfg);
        if r.region == Region::Rendezvous && previous == Some(Region::CollisionFree) {
            events.insert(
                0,
                Event {
                    step: r.step,
                    time: r.time,
                    kind: EventKind::RegionSwitch,
                },
            );
        }
        previous = Some(r.region);
        r.events = events;
    }
    let converged = records.last().is_some_and(|r| {
        r.states.iter().zip(&r.controls).all(|(s, c)| {
            s.position.distance(cfg.goal) < cfg.pos_tol && c.heading_error.abs() < cfg.ang_tol
        })
    });
    Ok(TrajectoryLog {
        n,
        dt: cfg.dt,
        goal: cfg.goal,
        tree_edges,
        records,
        converged,
        aborted: false,
    })
}
