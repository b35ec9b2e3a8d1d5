use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rendezvous_cli::app::{metrics_for_dir, plots_for_dir, run_config, RESOLVED_SCENARIO_FILE};
use rendezvous_cli::export::{export_trajectory, read_trajectory, DISTANCES_FILE, TRAJECTORY_FILE};
use rendezvous_cli::plots::emit_plot_script;
use rendezvous_cli::report::MetricsReport;
use rendezvous_cli::scenario::{parse_scenario, parse_scenario_str, scenario_to_string};
use rendezvous_core::sim::{RunOptions, Simulation};
use rendezvous_core::{GradientMode, Integrator, NeighborMode, Region, Vec2};

const TRIO: &str = r#"
format_version = 1
workspace_radius = 50.0
sensing_radius = 2.0
rendezvous_radius = 5.5
collision_margin = 0.4
connectivity_buffer = 0.4
sigmoid_eps = 0.01
alpha = 1.2
k_v = [2.0, 10.0, 10.0]
k_w = 4.0
goal = [0.0, 0.0]
goal_heading = 0.0
dt = 0.005
horizon = 80.0

[deployment]
poses = [[-3.0, 0.4, 0.3], [-3.6, 0.9, -1.0], [-3.7, -0.1, 2.0]]
"#;

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/rendezvous_s5.toml")
}

fn trio() -> rendezvous_core::ScenarioConfig {
    parse_scenario_str(TRIO, Path::new("trio")).unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn export_has_one_row_per_step_and_robot() {
    let mut cfg = parse_scenario_str(
        &TRIO
            .replace("k_v = [2.0, 10.0, 10.0]", "k_v = 1.0")
            .replace(
                "poses = [[-3.0, 0.4, 0.3], [-3.6, 0.9, -1.0], [-3.7, -0.1, 2.0]]",
                "poses = [[-3.0, 0.4, 0.3], [-3.6, 0.9, -1.0]]",
            ),
        Path::new("pair"),
    )
    .unwrap();
    cfg.horizon = 2.0 * cfg.dt;
    let log = Simulation::new(cfg)
        .unwrap()
        .run(RunOptions::default())
        .unwrap();
    assert_eq!(log.records.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let (traj, dist) = export_trajectory(&log, dir.path()).unwrap();
    let text = fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# format_version=1"));
    assert_eq!(
        lines.next(),
        Some("t,id,x,y,theta,v,omega,phi,region,theta_d,theta_err,theta_d_dot")
    );
    assert_eq!(lines.count(), 6);
    assert_eq!(data_rows(&dist).len(), 3);
    assert!(fs::read_to_string(&dist).unwrap().contains("\nt,i,j,d\n"));
}

#[test]
fn empty_log_is_not_exported() {
    let mut log = Simulation::new(trio())
        .unwrap()
        .run(RunOptions::default())
        .unwrap();
    log.records.clear();
    let dir = tempfile::tempdir().unwrap();
    let err = export_trajectory(&log, dir.path()).unwrap_err();
    assert!(err.to_string().contains("empty"), "{err}");
}

#[test]
fn metrics_survive_export_and_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_config(trio(), dir.path(), false).unwrap();
    assert!(summary.log.converged);
    let again = metrics_for_dir(dir.path()).unwrap();
    let written = MetricsReport::read(&dir.path().join("metrics.json")).unwrap();
    assert_eq!(written, summary.report);

    let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * a.abs().max(1.0);
    let close_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    };
    let r = &summary.report;
    assert_eq!(again.converged, r.converged);
    assert_eq!(again.records, r.records);
    assert_eq!(again.violations, r.violations);
    assert!(close(again.final_time, r.final_time));
    for (a, b) in again
        .final_position_errors
        .iter()
        .zip(&r.final_position_errors)
    {
        assert!(close(*a, *b));
    }
    for (a, b) in again
        .final_heading_errors
        .iter()
        .zip(&r.final_heading_errors)
    {
        assert!(close(*a, *b));
    }
    assert!(close_opt(
        again.min_distance_collision_free,
        r.min_distance_collision_free
    ));
    assert!(close_opt(
        again.max_tree_edge_distance,
        r.max_tree_edge_distance
    ));
    assert!(close_opt(again.switch_time, r.switch_time));
    assert!(close(
        again.max_potential_increase,
        r.max_potential_increase
    ));

    let cfg = parse_scenario(&dir.path().join(RESOLVED_SCENARIO_FILE)).unwrap();
    let log = read_trajectory(dir.path(), &cfg).unwrap();
    assert_eq!(log.tree_edges, summary.log.tree_edges);
    assert_eq!(
        log.switch_time().is_some(),
        summary.log.switch_time().is_some()
    );
}

#[test]
fn scenario_text_round_trips_field_by_field() {
    let mut cfg = trio();
    cfg.gradient_mode = GradientMode::Paper;
    cfg.neighbor_mode = NeighborMode::Accreting;
    cfg.integrator = Integrator::Euler;
    cfg.max_speed = Some(1.5);
    cfg.k_w = vec![1.0, 2.5, 0.1 + 0.2];
    let text = scenario_to_string(&cfg);
    let back = parse_scenario_str(&text, Path::new("round trip")).unwrap();
    assert_eq!(back.n, cfg.n);
    assert_eq!(back.workspace_radius, cfg.workspace_radius);
    assert_eq!(back.sensing_radius, cfg.sensing_radius);
    assert_eq!(back.rendezvous_radius, cfg.rendezvous_radius);
    assert_eq!(back.collision_margin, cfg.collision_margin);
    assert_eq!(back.connectivity_buffer, cfg.connectivity_buffer);
    assert_eq!(back.sigmoid_eps, cfg.sigmoid_eps);
    assert_eq!(back.dipole_eps, cfg.dipole_eps);
    assert_eq!(back.alpha, cfg.alpha);
    assert_eq!(back.k_v, cfg.k_v);
    assert_eq!(back.k_w, cfg.k_w);
    assert_eq!(back.goal, cfg.goal);
    assert_eq!(back.goal_heading, cfg.goal_heading);
    assert_eq!(back.dt, cfg.dt);
    assert_eq!(back.horizon, cfg.horizon);
    assert_eq!(back.initial_states, cfg.initial_states);
    assert_eq!(back.grad_tol, cfg.grad_tol);
    assert_eq!(back.d_min, cfg.d_min);
    assert_eq!(back.hessian_step, cfg.hessian_step);
    assert_eq!(back.gradient_mode, cfg.gradient_mode);
    assert_eq!(back.neighbor_mode, cfg.neighbor_mode);
    assert_eq!(back.integrator, cfg.integrator);
    assert_eq!(back.control_update, cfg.control_update);
    assert_eq!(back.pos_tol, cfg.pos_tol);
    assert_eq!(back.ang_tol, cfg.ang_tol);
    assert_eq!(back.collision_floor, cfg.collision_floor);
    assert_eq!(back.max_speed, cfg.max_speed);
    assert_eq!(back.max_turn_rate, cfg.max_turn_rate);
    assert_eq!(back, cfg);
}

#[test]
fn bundled_scenario_has_reference_parameters() {
    let cfg = parse_scenario(&bundled()).unwrap();
    assert_eq!(cfg.n, 6);
    assert_eq!(cfg.sensing_radius, 2.0);
    assert_eq!(cfg.collision_margin, 0.4);
    assert_eq!(cfg.connectivity_buffer, 0.4);
    assert_eq!(cfg.alpha, 1.2);
    assert_eq!(cfg.workspace_radius, 50.0);
    assert_eq!(cfg.rendezvous_radius, 11.5);
    assert!((cfg.switch_distance() - 1.5).abs() < 1e-12);
    assert_eq!(cfg.goal, Vec2::ZERO);
    // the seeded deployment expands the same way every time
    assert_eq!(
        parse_scenario(&bundled()).unwrap().initial_states,
        cfg.initial_states
    );
}

#[test]
fn plot_script_covers_three_figures_with_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    run_config(trio(), dir.path(), false).unwrap();
    let script = plots_for_dir(dir.path()).unwrap();
    let text = fs::read_to_string(&script).unwrap();
    assert_eq!(text.matches("fig.savefig(").count(), 3);
    for png in ["trajectories.png", "distances.png", "heading_error.png"] {
        assert!(text.contains(png));
    }
    assert!(text.contains(&format!("\"{TRAJECTORY_FILE}\"")));
    assert!(text.contains(&format!("\"{DISTANCES_FILE}\"")));
    let dir_text = dir.path().to_string_lossy();
    assert!(!text.contains(dir_text.as_ref()));
    assert!(!text.contains("/tmp"));
}

#[test]
fn plot_script_rejects_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_plot_script(&[], dir.path(), 2.0).is_err());
    let absent = [
        dir.path().join(TRAJECTORY_FILE),
        dir.path().join(DISTANCES_FILE),
    ];
    assert!(emit_plot_script(&absent, dir.path(), 2.0).is_err());
    let elsewhere = tempfile::tempdir().unwrap();
    run_config(trio(), elsewhere.path(), false).unwrap();
    let outside = [
        elsewhere.path().join(TRAJECTORY_FILE),
        elsewhere.path().join(DISTANCES_FILE),
    ];
    assert!(emit_plot_script(&outside, dir.path(), 2.0).is_err());
    assert!(emit_plot_script(&outside[..1], elsewhere.path(), 2.0).is_err());
}

fn python_with_matplotlib() -> bool {
    Command::new("python3")
        .args(["-c", "import matplotlib"])
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn emitted_plot_script_renders() {
    if !python_with_matplotlib() {
        eprintln!("python3 with matplotlib not found; skipping render");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    run_config(trio(), dir.path(), false).unwrap();
    let script = plots_for_dir(dir.path()).unwrap();
    let out = Command::new("python3").arg(&script).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for png in ["trajectories.png", "distances.png", "heading_error.png"] {
        assert!(fs::metadata(dir.path().join(png)).unwrap().len() > 0);
    }
}

fn rendezvous(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_rendezvous"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.toml", TRIO);
    let missing_key = write(
        dir.path(),
        "bad.toml",
        &TRIO.replace("rendezvous_radius = 5.5\n", ""),
    );
    let invalid = write(
        dir.path(),
        "invalid.toml",
        &TRIO.replace("alpha = 1.2", "alpha = -1.0"),
    );
    let split = write(
        dir.path(),
        "split.toml",
        &TRIO.replace("[-3.7, -0.1, 2.0]", "[-9.7, -0.1, 2.0]"),
    );
    let tight = write(
        dir.path(),
        "tight.toml",
        &TRIO.replace("horizon = 80.0", "horizon = 80.0\ncollision_floor = 0.9"),
    );
    let out = dir.path().join("out").to_string_lossy().into_owned();

    assert_eq!(rendezvous(&["check", &ok]), 0);
    assert_eq!(rendezvous(&["check", &missing_key]), 1);
    assert_eq!(rendezvous(&["check", &invalid]), 1);
    assert_eq!(rendezvous(&["check", "/nonexistent/scenario.toml"]), 1);
    assert_eq!(rendezvous(&["check", &split]), 2);
    assert_eq!(rendezvous(&["run", &split, "--out", &out]), 2);
    assert_eq!(rendezvous(&["run", &tight, "--strict", "--out", &out]), 3);
    assert_eq!(rendezvous(&["run", &tight, "--out", &out]), 0);
    assert_eq!(rendezvous(&["metrics", &out]), 0);
    assert_eq!(rendezvous(&["plots", &out]), 0);
    assert_eq!(rendezvous(&["frobnicate"]), 1);
    assert_eq!(rendezvous(&["--help"]), 0);
}

#[test]
fn reference_export_shows_plateau_then_renewed_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_scenario(&bundled()).unwrap();
    let summary = run_config(cfg, dir.path(), false).unwrap();
    let switch = summary.log.switch_time().expect("switch happens");

    let mut series: std::collections::BTreeMap<(usize, usize), Vec<(f64, f64)>> =
        Default::default();
    for row in data_rows(&dir.path().join(DISTANCES_FILE)) {
        let f: Vec<&str> = row.split(',').collect();
        let t: f64 = f[0].parse().unwrap();
        let edge = (f[1].parse().unwrap(), f[2].parse().unwrap());
        series
            .entry(edge)
            .or_default()
            .push((t, f[3].parse().unwrap()));
    }
    assert!(!series.is_empty());
    for (edge, s) in &series {
        let before: Vec<f64> = s
            .iter()
            .filter(|(t, _)| *t < switch)
            .map(|&(_, d)| d)
            .collect();
        let after: Vec<f64> = s
            .iter()
            .filter(|(t, _)| *t >= switch)
            .map(|&(_, d)| d)
            .collect();
        let low = before.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(before[0] > low, "{edge:?} never closes in");
        let tail = &before[before.len() / 2..];
        let tail_low = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let tail_high = tail.iter().copied().fold(0.0, f64::max);
        assert!(
            tail_high <= 1.01 * tail_low,
            "{edge:?} still moving: {tail_low}..{tail_high}"
        );
        assert!(
            *after.last().unwrap() < 0.99 * low,
            "{edge:?} does not close after the switch"
        );
    }
    assert_eq!(summary.log.records[0].region, Region::CollisionFree);
}
