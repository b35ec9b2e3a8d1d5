//! TOML scenario files.
//!
//! Every `ScenarioConfig` field has a key of the same name. Robots come
//! from a `[deployment]` table holding either explicit `poses` or a seeded
//! random placement; robot 1 is always the informed one.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rendezvous_core::graph::{build_topology, has_rooted_spanning_tree};
use rendezvous_core::model::{
    DEFAULT_ANG_TOL, DEFAULT_COLLISION_FLOOR, DEFAULT_DIPOLE_EPS, DEFAULT_D_MIN, DEFAULT_GRAD_TOL,
    DEFAULT_HESSIAN_STEP, DEFAULT_POS_TOL,
};
use rendezvous_core::{
    ControlUpdate, GradientMode, Integrator, NeighborMode, RobotState, Role, ScenarioConfig, Vec2,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 10_000;

/// A gain given once for all robots or once per robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Uniform(f64),
    PerRobot(Vec<f64>),
}

impl Gain {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Gain::Uniform(g) => vec![*g; n],
            Gain::PerRobot(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientModeKey {
    Full,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborModeKey {
    Frozen,
    Accreting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKey {
    Rk4,
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlUpdateKey {
    PerStage,
    ZeroOrderHold,
}

/// `[deployment]`: either `poses`, or `seed`, `count`, `center` and
/// `bounding_radius` (plus optional `min_separation`, `max_attempts`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    /// `[x, y, heading]` per robot, robot 1 first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding_radius: Option<f64>,
    /// Smallest allowed initial pair distance. Defaults to
    /// `collision_margin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<u32>,
}

fn default_dipole_eps() -> f64 {
    DEFAULT_DIPOLE_EPS
}
fn default_grad_tol() -> f64 {
    DEFAULT_GRAD_TOL
}
fn default_d_min() -> f64 {
    DEFAULT_D_MIN
}
fn default_hessian_step() -> f64 {
    DEFAULT_HESSIAN_STEP
}
fn default_pos_tol() -> f64 {
    DEFAULT_POS_TOL
}
fn default_ang_tol() -> f64 {
    DEFAULT_ANG_TOL
}
fn default_collision_floor() -> f64 {
    DEFAULT_COLLISION_FLOOR
}
fn default_gradient_mode() -> GradientModeKey {
    GradientModeKey::Full
}
fn default_neighbor_mode() -> NeighborModeKey {
    NeighborModeKey::Frozen
}
fn default_integrator() -> IntegratorKey {
    IntegratorKey::Rk4
}
fn default_control_update() -> ControlUpdateKey {
    ControlUpdateKey::PerStage
}

/// On-disk form of a scenario. Lengths in meters, angles in radians,
/// times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub workspace_radius: f64,
    pub sensing_radius: f64,
    pub rendezvous_radius: f64,
    pub collision_margin: f64,
    pub connectivity_buffer: f64,
    pub sigmoid_eps: f64,
    #[serde(default = "default_dipole_eps")]
    pub dipole_eps: f64,
    pub alpha: f64,
    pub k_v: Gain,
    pub k_w: Gain,
    pub goal: [f64; 2],
    pub goal_heading: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    #[serde(default = "default_hessian_step")]
    pub hessian_step: f64,
    #[serde(default = "default_gradient_mode")]
    pub gradient_mode: GradientModeKey,
    #[serde(default = "default_neighbor_mode")]
    pub neighbor_mode: NeighborModeKey,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorKey,
    #[serde(default = "default_control_update")]
    pub control_update: ControlUpdateKey,
    #[serde(default = "default_pos_tol")]
    pub pos_tol: f64,
    #[serde(default = "default_ang_tol")]
    pub ang_tol: f64,
    #[serde(default = "default_collision_floor")]
    pub collision_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_turn_rate: Option<f64>,
    pub deployment: Deployment,
}

impl ScenarioFile {
    /// Resolves the deployment and validates the result.
    pub fn into_config(self) -> Result<ScenarioConfig> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Model(rendezvous_core::Error::InvalidConfig(
                format!(
                    "unsupported format_version {} (expected {FORMAT_VERSION})",
                    self.format_version
                ),
            )));
        }
        let initial_states = self.deploy()?;
        let n = initial_states.len();
        let cfg = ScenarioConfig {
            n,
            workspace_radius: self.workspace_radius,
            sensing_radius: self.sensing_radius,
            rendezvous_radius: self.rendezvous_radius,
            collision_margin: self.collision_margin,
            connectivity_buffer: self.connectivity_buffer,
            sigmoid_eps: self.sigmoid_eps,
            dipole_eps: self.dipole_eps,
            alpha: self.alpha,
            k_v: self.k_v.expand(n),
            k_w: self.k_w.expand(n),
            goal: Vec2::new(self.goal[0], self.goal[1]),
            goal_heading: self.goal_heading,
            dt: self.dt,
            horizon: self.horizon,
            initial_states,
            grad_tol: self.grad_tol,
            d_min: self.d_min,
            hessian_step: self.hessian_step,
            gradient_mode: match self.gradient_mode {
                GradientModeKey::Full => GradientMode::Full,
                GradientModeKey::Paper => GradientMode::Paper,
            },
            neighbor_mode: match self.neighbor_mode {
                NeighborModeKey::Frozen => NeighborMode::Frozen,
                NeighborModeKey::Accreting => NeighborMode::Accreting,
            },
            integrator: match self.integrator {
                IntegratorKey::Rk4 => Integrator::Rk4,
                IntegratorKey::Euler => Integrator::Euler,
            },
            control_update: match self.control_update {
                ControlUpdateKey::PerStage => ControlUpdate::PerStage,
                ControlUpdateKey::ZeroOrderHold => ControlUpdate::ZeroOrderHold,
            },
            pos_tol: self.pos_tol,
            ang_tol: self.ang_tol,
            collision_floor: self.collision_floor,
            max_speed: self.max_speed,
            max_turn_rate: self.max_turn_rate,
        };
        Ok(cfg.validate()?)
    }

    fn deploy(&self) -> Result<Vec<RobotState>> {
        let d = &self.deployment;
        let seeded = [
            d.seed.is_some(),
            d.count.is_some(),
            d.center.is_some(),
            d.bounding_radius.is_some(),
        ];
        let invalid = |msg: &str| {
            CliError::Model(rendezvous_core::Error::InvalidConfig(format!(
                "deployment: {msg}"
            )))
        };
        match &d.poses {
            Some(poses) => {
                if seeded.iter().any(|&s| s)
                    || d.min_separation.is_some()
                    || d.max_attempts.is_some()
                {
                    return Err(invalid(
                        "`poses` cannot be combined with seeded placement keys",
                    ));
                }
                Ok(poses_to_states(poses))
            }
            None => {
                let (Some(seed), Some(count), Some(center), Some(radius)) =
                    (d.seed, d.count, d.center, d.bounding_radius)
                else {
                    return Err(invalid("give either `poses` or all of `seed`, `count`, `center`, `bounding_radius`"));
                };
                if count == 0 || radius.is_nan() || radius <= 0.0 {
                    return Err(invalid("`count` and `bounding_radius` must be positive"));
                }
                seeded_deployment(&SeededPlacement {
                    seed,
                    count,
                    center: Vec2::new(center[0], center[1]),
                    bounding_radius: radius,
                    min_separation: d.min_separation.unwrap_or(self.collision_margin),
                    sensing_radius: self.sensing_radius,
                    max_attempts: d.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS),
                })
            }
        }
    }

    /// File form of a resolved config, with explicit poses.
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ScenarioFile {
            format_version: FORMAT_VERSION,
            workspace_radius: cfg.workspace_radius,
            sensing_radius: cfg.sensing_radius,
            rendezvous_radius: cfg.rendezvous_radius,
            collision_margin: cfg.collision_margin,
            connectivity_buffer: cfg.connectivity_buffer,
            sigmoid_eps: cfg.sigmoid_eps,
            dipole_eps: cfg.dipole_eps,
            alpha: cfg.alpha,
            k_v: Gain::PerRobot(cfg.k_v.clone()),
            k_w: Gain::PerRobot(cfg.k_w.clone()),
            goal: [cfg.goal.x, cfg.goal.y],
            goal_heading: cfg.goal_heading,
            dt: cfg.dt,
            horizon: cfg.horizon,
            grad_tol: cfg.grad_tol,
            d_min: cfg.d_min,
            hessian_step: cfg.hessian_step,
            gradient_mode: match cfg.gradient_mode {
                GradientMode::Full => GradientModeKey::Full,
                GradientMode::Paper => GradientModeKey::Paper,
            },
            neighbor_mode: match cfg.neighbor_mode {
                NeighborMode::Frozen => NeighborModeKey::Frozen,
                NeighborMode::Accreting => NeighborModeKey::Accreting,
            },
            integrator: match cfg.integrator {
                Integrator::Rk4 => IntegratorKey::Rk4,
                Integrator::Euler => IntegratorKey::Euler,
            },
            control_update: match cfg.control_update {
                ControlUpdate::PerStage => ControlUpdateKey::PerStage,
                ControlUpdate::ZeroOrderHold => ControlUpdateKey::ZeroOrderHold,
            },
            pos_tol: cfg.pos_tol,
            ang_tol: cfg.ang_tol,
            collision_floor: cfg.collision_floor,
            max_speed: cfg.max_speed,
            max_turn_rate: cfg.max_turn_rate,
            deployment: Deployment {
                poses: Some(
                    cfg.initial_states
                        .iter()
                        .map(|s| [s.position.x, s.position.y, s.heading])
                        .collect(),
                ),
                ..Deployment::default()
            },
        }
    }
}

fn poses_to_states(poses: &[[f64; 3]]) -> Vec<RobotState> {
    poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let role = if k == 0 {
                Role::Informed
            } else {
                Role::Follower
            };
            RobotState::new(k + 1, Vec2::new(p[0], p[1]), p[2], role)
        })
        .collect()
}

/// Parameters of a seeded random deployment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeededPlacement {
    pub seed: u64,
    pub count: usize,
    pub center: Vec2,
    pub bounding_radius: f64,
    pub min_separation: f64,
    pub sensing_radius: f64,
    pub max_attempts: u32,
}

/// Uniform positions in the bounding disk and uniform headings, redrawn
/// as a whole until every pair is farther apart than `min_separation` and
/// robot 1 roots a spanning tree of the sensing graph.
pub fn seeded_deployment(p: &SeededPlacement) -> Result<Vec<RobotState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    for _ in 0..p.max_attempts {
        let poses: Vec<[f64; 3]> = (0..p.count)
            .map(|_| {
                let r = p.bounding_radius * rng.gen::<f64>().sqrt();
                let a = rng.gen_range(-PI..PI);
                let heading = rng.gen_range(-PI..PI);
                let at = p.center + Vec2::from_angle(a) * r;
                [at.x, at.y, heading]
            })
            .collect();
        let states = poses_to_states(&poses);
        let separated = states.iter().enumerate().all(|(k, a)| {
            states[k + 1..]
                .iter()
                .all(|b| a.position.distance(b.position) > p.min_separation)
        });
        if separated && has_rooted_spanning_tree(&build_topology(&states, p.sensing_radius), 1) {
            return Ok(states);
        }
    }
    Err(CliError::DeploymentExhausted {
        attempts: p.max_attempts,
    })
}

pub fn parse_scenario_str(text: &str, origin: &Path) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::parse(origin, e))?;
    file.into_config()
}

/// Reads, resolves and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario_str(&text, path)
}

/// Scenario text with every field spelled out and explicit poses.
pub fn scenario_to_string(cfg: &ScenarioConfig) -> String {
    toml::to_string(&ScenarioFile::from_config(cfg)).expect("scenario serializes to TOML")
}

pub fn write_scenario(cfg: &ScenarioConfig, path: &Path) -> Result<()> {
    fs::write(path, scenario_to_string(cfg)).map_err(|e| CliError::io(path, e))
}
