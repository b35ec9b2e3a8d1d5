//! Fixed-step simulation of the closed loop, runtime monitors and
//! trajectory metrics.
//!
//! Every step first evaluates all controllers on one synchronous snapshot,
//! then integrates the unicycle kinematics `(v cos θ, v sin θ, ω)` for all
//! robots at once.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::controller::{compute_control, ControlContext, ControlOutput, Gains, Saturation};
use crate::diff::{grad_navfunc_follower, EvalOptions};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::graph::{
    build_topology, has_rooted_spanning_tree, laplacian, tree_edge_stress, Edge, EdgeMargin,
    LaplacianSnapshot, Topology,
};
use crate::model::{
    normalize_angle, ControlUpdate, Integrator, NeighborMode, Region, RobotState, ScenarioConfig,
};
use crate::navfield::{region_of, FieldParams};

/// Distance between robots `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDistance {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    /// A monitored tree edge reached the sensing radius.
    ConnectivityLost { edge: Edge, distance: f64 },
    /// Two robots came within the collision floor while repulsion was on.
    Collision { pair: (usize, usize), distance: f64 },
    /// A robot touched or left the workspace boundary.
    BoundaryContact { robot: usize, clearance: f64 },
    /// The leader is farther than `R_w − R(N−1)` from the center while a
    /// follower is within `R(N−1)` of the boundary.
    LeaderBeyondSafeRadius { distance: f64 },
    /// First record in the rendezvous region.
    RegionSwitch,
    /// A robot's gradient vanished and its desired heading was held.
    HeadingHeld { robot: usize },
}

impl EventKind {
    /// Whether the event breaks one of the guarded properties.
    pub fn is_violation(&self) -> bool {
        matches!(
            self,
            EventKind::ConnectivityLost { .. }
                | EventKind::Collision { .. }
                | EventKind::BoundaryContact { .. }
                | EventKind::LeaderBeyondSafeRadius { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub step: usize,
    pub time: f64,
    pub kind: EventKind,
}

/// Snapshot of the whole group at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub region: Region,
    pub states: Vec<RobotState>,
    pub controls: Vec<ControlOutput>,
    /// φ_i of every robot.
    pub potentials: Vec<f64>,
    /// All pairs `i < j`.
    pub distances: Vec<PairDistance>,
    pub edge_margins: Vec<EdgeMargin>,
    pub events: Vec<Event>,
}

impl StepRecord {
    pub fn potential_sum(&self) -> f64 {
        self.potentials.iter().sum()
    }

    pub fn min_pair_distance(&self) -> Option<f64> {
        self.distances.iter().map(|d| d.distance).reduce(f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub n: usize,
    pub dt: f64,
    pub goal: Vec2,
    pub tree_edges: Vec<Edge>,
    pub records: Vec<StepRecord>,
    /// Convergence tolerances were met at the last record.
    pub converged: bool,
    /// The run stopped on a monitor violation.
    pub aborted: bool,
}

impl TrajectoryLog {
    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().flat_map(|r| r.events.iter())
    }

    pub fn violations(&self) -> impl Iterator<Item = &Event> {
        self.events().filter(|e| e.kind.is_violation())
    }

    pub fn switch_time(&self) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.region == Region::Rendezvous)
            .map(|r| r.time)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Stop at the first record carrying a violation event.
    pub stop_on_violation: bool,
}

/// Result of one integration step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub states: Vec<RobotState>,
    /// Controls evaluated on the step-start snapshot.
    pub controls: Vec<ControlOutput>,
    pub region: Region,
}

/// Kinematic rates `(ẋ, ẏ, θ̇)`.
type Rate = [f64; 3];

fn unicycle_rate(heading: f64, v: f64, omega: f64) -> Rate {
    [v * libm::cos(heading), v * libm::sin(heading), omega]
}

fn advance(states: &[RobotState], rates: &[Rate], h: f64) -> Vec<RobotState> {
    states
        .iter()
        .zip(rates)
        .map(|(s, r)| RobotState {
            position: Vec2::new(s.position.x + h * r[0], s.position.y + h * r[1]),
            heading: s.heading + h * r[2],
            ..*s
        })
        .collect()
}

/// One fixed step of a time-invariant rate law over the whole group.
/// Headings are left unwrapped.
fn integrate<F>(
    states: &[RobotState],
    dt: f64,
    integrator: Integrator,
    first: Vec<Rate>,
    mut rates: F,
) -> Result<Vec<RobotState>>
where
    F: FnMut(&[RobotState]) -> Result<Vec<Rate>>,
{
    match integrator {
        Integrator::Euler => Ok(advance(states, &first, dt)),
        Integrator::Rk4 => {
            let k1 = first;
            let k2 = rates(&advance(states, &k1, 0.5 * dt))?;
            let k3 = rates(&advance(states, &k2, 0.5 * dt))?;
            let k4 = rates(&advance(states, &k3, dt))?;
            let combined: Vec<Rate> = (0..states.len())
                .map(|i| {
                    let mut r = [0.0; 3];
                    for (c, slot) in r.iter_mut().enumerate() {
                        *slot = (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]) / 6.0;
                    }
                    r
                })
                .collect();
            Ok(advance(states, &combined, dt))
        }
    }
}

/// Integrates one robot under constant inputs for `dt`. The heading is
/// normalized on return.
pub fn integrate_unicycle(
    state: &RobotState,
    v: f64,
    omega: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<RobotState> {
    let first = vec![unicycle_rate(state.heading, v, omega)];
    let out = integrate(
        core::slice::from_ref(state),
        dt,
        integrator,
        first,
        |snap| Ok(vec![unicycle_rate(snap[0].heading, v, omega)]),
    )?;
    let mut s = out[0];
    s.heading = normalize_angle(s.heading)?;
    Ok(s)
}

/// Pure controller evaluation for a whole group. Neighbor positions are
/// always read from `states`, never from partially updated data.
pub struct GroupController<'a> {
    pub cfg: &'a ScenarioConfig,
    pub params: FieldParams,
    pub eval: EvalOptions,
    pub topology: &'a Topology,
    /// Order in which robots are evaluated. Results are stored by index,
    /// so the order must not matter.
    pub order: Vec<usize>,
}

impl<'a> GroupController<'a> {
    pub fn new(cfg: &'a ScenarioConfig, topology: &'a Topology) -> Self {
        GroupController {
            cfg,
            params: FieldParams::from_config(cfg),
            eval: EvalOptions {
                gradient_mode: cfg.gradient_mode,
                d_min: cfg.d_min,
                hessian_step: cfg.hessian_step,
            },
            topology,
            order: (0..cfg.n).collect(),
        }
    }

    /// Controls and potentials of every robot on one snapshot.
    pub fn evaluate(
        &self,
        states: &[RobotState],
        region: Region,
        previous_desired: &[Option<f64>],
    ) -> Result<(Vec<ControlOutput>, Vec<f64>)> {
        let ctx = ControlContext {
            region,
            params: &self.params,
            eval: &self.eval,
            grad_tol: self.cfg.grad_tol,
            saturation: Saturation {
                max_speed: self.cfg.max_speed,
                max_turn_rate: self.cfg.max_turn_rate,
            },
        };
        let mut controls = vec![ControlOutput::IDLE; states.len()];
        let mut potentials = vec![0.0; states.len()];
        let mut neighbors = Vec::new();
        for &k in &self.order {
            let robot = &states[k];
            neighbors.clear();
            neighbors.extend(
                self.topology
                    .neighbors(robot.id)
                    .iter()
                    .map(|&j| states[j - 1].position),
            );
            let gains = Gains {
                k_v: self.cfg.k_v[k],
                k_w: self.cfg.k_w[k],
            };
            let (out, field, _) =
                compute_control(robot, &neighbors, gains, previous_desired[k], &ctx)?;
            controls[k] = out;
            potentials[k] = field.value;
        }
        Ok((controls, potentials))
    }
}

/// Advances the group by one step of `cfg.dt` from a synchronous
/// snapshot and updates the latched region.
pub fn step(
    states: &[RobotState],
    region: Region,
    previous_desired: &[Option<f64>],
    controller: &GroupController<'_>,
    step_index: usize,
) -> Result<StepOutcome> {
    let (controls, _) = controller.evaluate(states, region, previous_desired)?;
    let next = step_with_controls(states, region, controller, &controls, step_index)?;
    Ok(StepOutcome {
        states: next.0,
        controls,
        region: next.1,
    })
}

fn step_with_controls(
    states: &[RobotState],
    region: Region,
    controller: &GroupController<'_>,
    controls: &[ControlOutput],
    step_index: usize,
) -> Result<(Vec<RobotState>, Region)> {
    let cfg = controller.cfg;
    let first: Vec<Rate> = states
        .iter()
        .zip(controls)
        .map(|(s, c)| unicycle_rate(s.heading, c.v, c.omega))
        .collect();
    let held: Vec<Option<f64>> = controls.iter().map(|c| Some(c.desired_heading)).collect();
    let mut next = match cfg.control_update {
        ControlUpdate::PerStage => integrate(states, cfg.dt, cfg.integrator, first, |snap| {
            let (stage, _) = controller.evaluate(snap, region, &held)?;
            Ok(snap
                .iter()
                .zip(&stage)
                .map(|(s, c)| unicycle_rate(s.heading, c.v, c.omega))
                .collect())
        })?,
        ControlUpdate::ZeroOrderHold => integrate(states, cfg.dt, cfg.integrator, first, |snap| {
            Ok(snap
                .iter()
                .zip(controls)
                .map(|(s, c)| unicycle_rate(s.heading, c.v, c.omega))
                .collect())
        })?,
    };
    for s in &mut next {
        if !s.position.is_finite() || !s.heading.is_finite() {
            return Err(Error::NonFiniteState {
                step: step_index,
                robot: s.id,
                dump: format!("{states:?}"),
            });
        }
        s.heading = normalize_angle(s.heading)?;
    }
    let leader = next.iter().find(|s| s.is_informed()).copied();
    let region = match leader {
        Some(l) => region_of(&l, region, &controller.params),
        None => region,
    };
    Ok((next, region))
}

/// Distances of all pairs `i < j`.
pub fn pair_distances(states: &[RobotState]) -> Vec<PairDistance> {
    let mut out = Vec::with_capacity(states.len() * states.len().saturating_sub(1) / 2);
    for (a, si) in states.iter().enumerate() {
        for sj in &states[a + 1..] {
            out.push(PairDistance {
                i: si.id,
                j: sj.id,
                distance: si.position.distance(sj.position),
            });
        }
    }
    out
}

/// Monitor checks for one record: connectivity of monitored edges,
/// collisions while repulsion is active, workspace clearance, and the
/// leader's safe-radius precondition.
pub fn monitor_invariants(record: &StepRecord, cfg: &ScenarioConfig) -> Vec<Event> {
    let mut events = Vec::new();
    let mut push = |kind| {
        events.push(Event {
            step: record.step,
            time: record.time,
            kind,
        })
    };
    for m in &record.edge_margins {
        if m.distance >= cfg.sensing_radius {
            push(EventKind::ConnectivityLost {
                edge: m.edge,
                distance: m.distance,
            });
        }
    }
    if record.region == Region::CollisionFree {
        for d in &record.distances {
            if d.distance <= cfg.collision_floor {
                push(EventKind::Collision {
                    pair: (d.i, d.j),
                    distance: d.distance,
                });
            }
        }
    }
    for s in &record.states {
        let clearance = cfg.workspace_radius - s.position.norm();
        if clearance <= 0.0 {
            push(EventKind::BoundaryContact {
                robot: s.id,
                clearance,
            });
        }
    }
    let chain = cfg.sensing_radius * (record.states.len().saturating_sub(1)) as f64;
    if let Some(leader) = record.states.iter().find(|s| s.is_informed()) {
        let r = leader.position.norm();
        let follower_near_boundary = record
            .states
            .iter()
            .any(|s| !s.is_informed() && cfg.workspace_radius - s.position.norm() < chain);
        if r > cfg.workspace_radius - chain && follower_near_boundary {
            push(EventKind::LeaderBeyondSafeRadius { distance: r });
        }
    }
    for (s, c) in record.states.iter().zip(&record.controls) {
        if c.heading_held {
            push(EventKind::HeadingHeld { robot: s.id });
        }
    }
    events
}

/// Laplacian of the follower dynamics at one snapshot, with weights from
/// the configured gradient mode.
pub fn laplacian_at(
    states: &[RobotState],
    topology: &Topology,
    region: Region,
    cfg: &ScenarioConfig,
    time: f64,
) -> Result<LaplacianSnapshot> {
    let params = FieldParams::from_config(cfg);
    let mut weights = BTreeMap::new();
    for s in states.iter().filter(|s| !s.is_informed()) {
        let ids = topology.neighbors(s.id);
        let nbrs: Vec<Vec2> = ids.iter().map(|&j| states[j - 1].position).collect();
        let bundle = grad_navfunc_follower(
            s.position,
            &nbrs,
            region,
            &params,
            cfg.gradient_mode,
            cfg.d_min,
        )?;
        for (&j, &m) in ids.iter().zip(&bundle.weights) {
            weights.insert((s.id, j), m);
        }
    }
    laplacian(topology, &weights, &cfg.k_v, time)
}

/// Stepping state of one run.
pub struct Simulation {
    cfg: ScenarioConfig,
    topology: Topology,
    states: Vec<RobotState>,
    region: Region,
    previous_desired: Vec<Option<f64>>,
    step_index: usize,
    order: Option<Vec<usize>>,
}

impl Simulation {
    /// Validates the scenario and freezes `G(0)`. Fails when the informed
    /// robot does not root a spanning tree of the initial sensing graph.
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        let cfg = cfg.validate()?;
        let topology = build_topology(&cfg.initial_states, cfg.sensing_radius);
        let root = cfg.informed_id().unwrap_or(1);
        if !has_rooted_spanning_tree(&topology, root) {
            return Err(Error::NoSpanningTree { root });
        }
        let states = cfg.initial_states.clone();
        let params = FieldParams::from_config(&cfg);
        let leader = states[root - 1];
        let region = region_of(&leader, Region::CollisionFree, &params);
        Ok(Simulation {
            previous_desired: vec![None; cfg.n],
            cfg,
            topology,
            states,
            region,
            step_index: 0,
            order: None,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn states(&self) -> &[RobotState] {
        &self.states
    }

    pub fn region(&self) -> Region {
        self.region
    }

    /// Overrides the order in which robots are evaluated inside a step.
    pub fn set_evaluation_order(&mut self, order: Vec<usize>) {
        self.order = Some(order);
    }

    fn controller(&self) -> GroupController<'_> {
        let mut c = GroupController::new(&self.cfg, &self.topology);
        if let Some(order) = &self.order {
            c.order = order.clone();
        }
        c
    }

    fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt
    }

    /// Record of the current snapshot, with monitor events.
    fn record(
        &self,
        controls: Vec<ControlOutput>,
        potentials: Vec<f64>,
        switched: bool,
    ) -> StepRecord {
        let positions: Vec<Vec2> = self.states.iter().map(|s| s.position).collect();
        let mut record = StepRecord {
            step: self.step_index,
            time: self.time(),
            region: self.region,
            states: self.states.clone(),
            controls,
            potentials,
            distances: pair_distances(&self.states),
            edge_margins: tree_edge_stress(
                &self.topology,
                &positions,
                self.cfg.sensing_radius,
                self.cfg.connectivity_buffer,
            ),
            events: Vec::new(),
        };
        let mut events = monitor_invariants(&record, &self.cfg);
        if switched {
            events.insert(
                0,
                Event {
                    step: record.step,
                    time: record.time,
                    kind: EventKind::RegionSwitch,
                },
            );
        }
        record.events = events;
        record
    }

    fn converged(&self, controls: &[ControlOutput]) -> bool {
        self.states.iter().zip(controls).all(|(s, c)| {
            s.position.distance(self.cfg.goal) < self.cfg.pos_tol
                && c.heading_error.abs() < self.cfg.ang_tol
        })
    }

    /// Runs until convergence, the horizon, or (optionally) the first
    /// violation. The log holds one record per visited step, including
    /// t = 0 and the final state.
    pub fn run(mut self, opts: RunOptions) -> Result<TrajectoryLog> {
        let max_steps = self.cfg.step_count();
        let mut records = Vec::with_capacity(max_steps.min(1 << 16) + 1);
        let mut switched = self.region == Region::Rendezvous;
        let mut converged = false;
        let mut aborted = false;
        loop {
            let controller = self.controller();
            let (controls, potentials) =
                controller.evaluate(&self.states, self.region, &self.previous_desired)?;
            drop(controller);
            let done = self.converged(&controls);
            let record = self.record(controls, potentials, switched);
            let violated = record.events.iter().any(|e| e.kind.is_violation());
            let controls = record.controls.clone();
            records.push(record);
            if done {
                converged = true;
                break;
            }
            if opts.stop_on_violation && violated {
                aborted = true;
                break;
            }
            if self.step_index >= max_steps {
                break;
            }
            let controller = self.controller();
            let (next, region) = step_with_controls(
                &self.states,
                self.region,
                &controller,
                &controls,
                self.step_index,
            )?;
            drop(controller);
            if self.cfg.neighbor_mode == NeighborMode::Accreting {
                let positions: Vec<Vec2> = next.iter().map(|s| s.position).collect();
                self.topology.accrete(
                    &positions,
                    self.cfg.sensing_radius,
                    self.cfg.connectivity_buffer,
                );
            }
            switched = region == Region::Rendezvous && self.region == Region::CollisionFree;
            self.previous_desired = controls.iter().map(|c| Some(c.desired_heading)).collect();
            self.states = next;
            self.region = region;
            self.step_index += 1;
        }
        Ok(TrajectoryLog {
            n: self.cfg.n,
            dt: self.cfg.dt,
            goal: self.cfg.goal,
            tree_edges: self.topology.tree_edges().to_vec(),
            records,
            converged,
            aborted,
        })
    }
}

/// Validates `cfg`, checks the spanning-tree assumption on `G(0)` and
/// simulates it.
pub fn run(cfg: ScenarioConfig) -> Result<TrajectoryLog> {
    Simulation::new(cfg)?.run(RunOptions::default())
}

/// Summary quantities of a run, derived from its log only.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    /// `‖p_i − p*‖` at the last record.
    pub final_position_errors: Vec<f64>,
    /// `|θ̃_i|` at the last record.
    pub final_heading_errors: Vec<f64>,
    /// Smallest pair distance over records in the collision-free region.
    pub min_distance_collision_free: Option<f64>,
    /// Largest monitored-edge length over the run.
    pub max_tree_edge_distance: Option<f64>,
    pub switch_time: Option<f64>,
    /// Least-squares decay rate of `|θ̃_1|` after the switch (whole run
    /// when there is none).
    pub heading_decay_rate: Option<f64>,
    /// Largest increase of `Σ φ_i` between consecutive records.
    pub max_potential_increase: f64,
    pub final_time: f64,
}

/// Heading errors at or below this are excluded from decay fits.
pub const DECAY_FIT_FLOOR: f64 = 1e-9;

/// Least-squares slope of `ln y` against `t`, negated. Samples with
/// `y <= floor` are skipped; needs at least two samples.
pub fn fit_decay_rate(samples: impl IntoIterator<Item = (f64, f64)>, floor: f64) -> Option<f64> {
    let (mut n, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, y) in samples {
        if y.is_nan() || y <= floor {
            continue;
        }
        let ly = libm::log(y);
        n += 1.0;
        st += t;
        sy += ly;
        stt += t * t;
        sty += t * ly;
    }
    if n < 2.0 {
        return None;
    }
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return None;
    }
    Some(-(n * sty - st * sy) / denom)
}

pub fn compute_metrics(log: &TrajectoryLog) -> Result<Metrics> {
    let last = log.records.last().ok_or(Error::EmptyLog)?;
    let switch_time = log.switch_time();
    let min_distance_collision_free = log
        .records
        .iter()
        .filter(|r| r.region == Region::CollisionFree)
        .filter_map(StepRecord::min_pair_distance)
        .reduce(f64::min);
    let max_tree_edge_distance = log
        .records
        .iter()
        .flat_map(|r| r.edge_margins.iter().map(|m| m.distance))
        .reduce(f64::max);
    let leader = last
        .states
        .iter()
        .position(|s| s.is_informed())
        .unwrap_or(0);
    let window_start = switch_time.unwrap_or(f64::NEG_INFINITY);
    let heading_decay_rate = fit_decay_rate(
        log.records
            .iter()
            .filter(|r| r.time >= window_start)
            .map(|r| (r.time, r.controls[leader].heading_error.abs())),
        DECAY_FIT_FLOOR,
    );
    let max_potential_increase = log
        .records
        .windows(2)
        .map(|w| w[1].potential_sum() - w[0].potential_sum())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    Ok(Metrics {
        final_position_errors: last
            .states
            .iter()
            .map(|s| s.position.distance(log.goal))
            .collect(),
        final_heading_errors: last
            .controls
            .iter()
            .map(|c| c.heading_error.abs())
            .collect(),
        min_distance_collision_free,
        max_tree_edge_distance,
        switch_time,
        heading_decay_rate,
        max_potential_increase,
        final_time: last.time,
    })
}

/// Heading response with every position held fixed, so the field and the
/// desired heading are frozen and the exact feedforward is zero. Returns
/// `(t, θ̃)` samples, one per step including t = 0.
pub fn frozen_field_heading_response(
    robot: &RobotState,
    desired_heading: f64,
    k_w: f64,
    dt: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<Vec<(f64, f64)>> {
    let mut heading = robot.heading;
    let mut out = Vec::with_capacity(steps + 1);
    let rate = |h: f64| -> Result<f64> { Ok(-k_w * normalize_angle(h - desired_heading)?) };
    for k in 0..=steps {
        out.push((k as f64 * dt, normalize_angle(heading - desired_heading)?));
        if k == steps {
            break;
        }
        heading = match integrator {
            Integrator::Euler => heading + dt * rate(heading)?,
            Integrator::Rk4 => {
                let k1 = rate(heading)?;
                let k2 = rate(heading + 0.5 * dt * k1)?;
                let k3 = rate(heading + 0.5 * dt * k2)?;
                let k4 = rate(heading + dt * k3)?;
                heading + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            }
        };
    }
    Ok(out)
}
