//! Domain types shared by every module: robot poses, roles, the scenario
//! configuration and its validation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Whether a robot knows the goal pose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Informed,
    Follower,
}

/// Pose and role of one robot. Ids are 1-based and stable for a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub position: Vec2,
    /// Radians in (-π, π].
    pub heading: f64,
    pub role: Role,
}

impl RobotState {
    pub fn new(id: usize, position: Vec2, heading: f64, role: Role) -> Self {
        RobotState {
            id,
            position,
            heading,
            role,
        }
    }

    pub fn is_informed(&self) -> bool {
        self.role == Role::Informed
    }
}

/// Which part of the workspace the group operates in. The only legal
/// transition is `CollisionFree -> Rendezvous`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    /// Inter-robot repulsion active.
    CollisionFree,
    /// Leader close to the goal, repulsion removed.
    Rendezvous,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::CollisionFree => "collision_free",
            Region::Rendezvous => "rendezvous",
        }
    }
}

/// How the follower constraint gradient is formed in the collision-free
/// region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientMode {
    /// Exact derivative of the field being evaluated, including the
    /// collision sigmoids.
    Full,
    /// The published closed form: only connectivity sigmoids are
    /// differentiated and the sum carries a leading factor of 2.
    Paper,
}

/// Whether neighbor sets are fixed at t = 0 or may grow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NeighborMode {
    Frozen,
    /// Add an edge once `d < R - δ2`; never remove one.
    Accreting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Integrator {
    Rk4,
    Euler,
}

/// When the feedback law is re-evaluated inside one integration step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControlUpdate {
    /// Every integrator stage evaluates the controllers on its own
    /// synchronous snapshot, so the scheme integrates the closed loop.
    PerStage,
    /// Controls from the step-start snapshot are held over the step.
    ZeroOrderHold,
}

/// Full description of one experiment. Lengths in meters, angles in
/// radians, times in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    /// R_w, radius of the disk workspace centered at the origin.
    pub workspace_radius: f64,
    /// R, sensing and communication radius.
    pub sensing_radius: f64,
    /// R_r, radius of the rendezvous disk around the goal.
    pub rendezvous_radius: f64,
    /// δ1, radius of the collision region around each robot.
    pub collision_margin: f64,
    /// δ2, width of the escape ring inside the sensing disk.
    pub connectivity_buffer: f64,
    /// ε, sigmoid steepness constant.
    pub sigmoid_eps: f64,
    /// ε_nh, floor of the dipolar factor.
    pub dipole_eps: f64,
    /// α, navigation-function tuning exponent.
    pub alpha: f64,
    pub k_v: Vec<f64>,
    pub k_w: Vec<f64>,
    pub goal: Vec2,
    pub goal_heading: f64,
    pub dt: f64,
    pub horizon: f64,
    pub initial_states: Vec<RobotState>,
    /// Gradient norm below which the desired heading is held.
    pub grad_tol: f64,
    /// Distance below which an edge term is dropped from gradients.
    pub d_min: f64,
    /// Finite-difference step for the feedforward Hessian.
    pub hessian_step: f64,
    pub gradient_mode: GradientMode,
    pub neighbor_mode: NeighborMode,
    pub integrator: Integrator,
    pub control_update: ControlUpdate,
    /// Convergence radius around the goal.
    pub pos_tol: f64,
    /// Convergence bound on |heading error|.
    pub ang_tol: f64,
    /// Pair distance in the collision-free region that raises a collision
    /// event.
    pub collision_floor: f64,
    /// Optional |v| limit. Off by default.
    pub max_speed: Option<f64>,
    /// Optional |ω| limit. Off by default.
    pub max_turn_rate: Option<f64>,
}

pub const DEFAULT_DIPOLE_EPS: f64 = 0.01;
pub const DEFAULT_GRAD_TOL: f64 = 1e-9;
pub const DEFAULT_D_MIN: f64 = 1e-9;
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-5;
pub const DEFAULT_DT: f64 = 0.005;
pub const DEFAULT_POS_TOL: f64 = 0.05;
pub const DEFAULT_ANG_TOL: f64 = 0.02;
pub const DEFAULT_COLLISION_FLOOR: f64 = 0.05;

impl ScenarioConfig {
    /// The six-robot benchmark parameters with uniform gains, applied to
    /// the given initial poses. The goal is the origin with heading 0.
    pub fn benchmark(initial_states: Vec<RobotState>) -> Self {
        let n = initial_states.len();
        ScenarioConfig {
            n,
            workspace_radius: 50.0,
            sensing_radius: 2.0,
            rendezvous_radius: 11.5,
            collision_margin: 0.4,
            connectivity_buffer: 0.4,
            sigmoid_eps: 0.01,
            dipole_eps: DEFAULT_DIPOLE_EPS,
            alpha: 1.2,
            k_v: alloc::vec![1.0; n],
            k_w: alloc::vec![1.0; n],
            goal: Vec2::ZERO,
            goal_heading: 0.0,
            dt: DEFAULT_DT,
            horizon: 120.0,
            initial_states,
            grad_tol: DEFAULT_GRAD_TOL,
            d_min: DEFAULT_D_MIN,
            hessian_step: DEFAULT_HESSIAN_STEP,
            gradient_mode: GradientMode::Full,
            neighbor_mode: NeighborMode::Frozen,
            integrator: Integrator::Rk4,
            control_update: ControlUpdate::PerStage,
            pos_tol: DEFAULT_POS_TOL,
            ang_tol: DEFAULT_ANG_TOL,
            collision_floor: DEFAULT_COLLISION_FLOOR,
            max_speed: None,
            max_turn_rate: None,
        }
    }

    /// Leader distance to the goal below which repulsion is switched off:
    /// `R_r - R (N - 1)`.
    pub fn switch_distance(&self) -> f64 {
        self.rendezvous_radius - self.sensing_radius * (self.n.saturating_sub(1)) as f64
    }

    /// Number of integration steps covering the horizon.
    pub fn step_count(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }

    pub fn informed_id(&self) -> Option<usize> {
        self.initial_states
            .iter()
            .find(|s| s.is_informed())
            .map(|s| s.id)
    }

    /// Checks every scenario invariant and returns the config unchanged
    /// when they all hold. Headings are normalized into (-π, π].
    pub fn validate(mut self) -> Result<Self> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));

        let positive = [
            ("R_w", self.workspace_radius),
            ("R", self.sensing_radius),
            ("R_r", self.rendezvous_radius),
            ("δ1", self.collision_margin),
            ("δ2", self.connectivity_buffer),
            ("ε_nh", self.dipole_eps),
            ("α", self.alpha),
            ("dt", self.dt),
            ("T", self.horizon),
            ("hessian_step", self.hessian_step),
            ("d_min", self.d_min),
            ("pos_tol", self.pos_tol),
            ("ang_tol", self.ang_tol),
            ("collision_floor", self.collision_floor),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return fail(format!("{name} must be finite and > 0 (got {value})"));
            }
        }
        if !self.grad_tol.is_finite() || self.grad_tol < 0.0 {
            return fail(format!(
                "grad_tol must be finite and >= 0 (got {})",
                self.grad_tol
            ));
        }
        if !(self.sigmoid_eps > 0.0 && self.sigmoid_eps < 0.5) {
            return fail(format!("ε must lie in (0, 0.5) (got {})", self.sigmoid_eps));
        }
        for (name, limit) in [
            ("max_speed", self.max_speed),
            ("max_turn_rate", self.max_turn_rate),
        ] {
            if let Some(v) = limit {
                if !v.is_finite() || v <= 0.0 {
                    return fail(format!("{name} must be finite and > 0 (got {v})"));
                }
            }
        }
        if self.collision_margin >= self.sensing_radius {
            return fail(String::from("δ1 must be < R"));
        }
        if self.connectivity_buffer >= self.sensing_radius {
            return fail(String::from("δ2 must be < R"));
        }
        if self.n == 0 {
            return fail(String::from("N must be at least 1"));
        }
        let chain = self.sensing_radius * (self.n - 1) as f64;
        if self.rendezvous_radius <= chain {
            return fail(format!(
                "R_r must be > R(N-1) = {chain} (got {})",
                self.rendezvous_radius
            ));
        }
        if self.workspace_radius < 2.0 * self.rendezvous_radius {
            return fail(format!(
                "R_w must be >= 2 R_r = {} (got {})",
                2.0 * self.rendezvous_radius,
                self.workspace_radius
            ));
        }
        if self.k_v.len() != self.n || self.k_w.len() != self.n {
            return fail(format!(
                "k_v and k_w need {} entries (got {} and {})",
                self.n,
                self.k_v.len(),
                self.k_w.len()
            ));
        }
        for (i, (&kv, &kw)) in self.k_v.iter().zip(&self.k_w).enumerate() {
            if !(kv.is_finite() && kv > 0.0 && kw.is_finite() && kw > 0.0) {
                return fail(format!("gains of robot {} must be finite and > 0", i + 1));
            }
        }
        if !self.goal.is_finite() || !self.goal_heading.is_finite() {
            return fail(String::from("goal pose must be finite"));
        }
        if self.goal.norm() >= self.workspace_radius {
            return fail(String::from("goal must lie inside the workspace"));
        }
        self.goal_heading = normalize_angle(self.goal_heading)?;
        if self.initial_states.len() != self.n {
            return fail(format!(
                "expected {} initial states, got {}",
                self.n,
                self.initial_states.len()
            ));
        }
        let informed = self
            .initial_states
            .iter()
            .filter(|s| s.is_informed())
            .count();
        if informed != 1 {
            return fail(format!(
                "exactly one informed robot required (got {informed})"
            ));
        }
        for (k, s) in self.initial_states.iter_mut().enumerate() {
            if s.id != k + 1 {
                return fail(format!(
                    "robot ids must run 1..N in order (position {} has id {})",
                    k + 1,
                    s.id
                ));
            }
            if !s.position.is_finite() || !s.heading.is_finite() {
                return fail(format!("robot {} has a non-finite pose", s.id));
            }
            if s.position.norm() >= self.workspace_radius {
                return fail(format!("robot {} lies outside the workspace", s.id));
            }
            s.heading = normalize_angle(s.heading)?;
        }
        if !self.initial_states[0].is_informed() {
            return fail(String::from("the informed robot must have id 1"));
        }
        Ok(self)
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    let mut a = theta % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    Ok(a)
}

/// Shortest signed angle `a - b`, in (-π, π].
pub fn angle_difference(a: f64, b: f64) -> Result<f64> {
    normalize_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    pub(crate) fn reference_states() -> Vec<RobotState> {
        (1..=6)
            .map(|id| {
                let role = if id == 1 {
                    Role::Informed
                } else {
                    Role::Follower
                };
                RobotState::new(id, Vec2::new(-8.0 + 0.5 * id as f64, 1.0), 0.0, role)
            })
            .collect()
    }

    #[test]
    fn benchmark_config_is_valid() {
        let cfg = ScenarioConfig::benchmark(reference_states());
        let checked = cfg.clone().validate().unwrap();
        assert_eq!(checked, cfg);
        assert!((checked.switch_distance() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn collision_margin_equal_to_sensing_radius_is_rejected() {
        let mut cfg = ScenarioConfig::benchmark(reference_states());
        cfg.collision_margin = cfg.sensing_radius;
        assert_eq!(
            cfg.validate().unwrap_err(),
            Error::InvalidConfig(String::from("δ1 must be < R"))
        );
    }

    #[test]
    fn two_informed_robots_are_rejected() {
        let mut cfg = ScenarioConfig::benchmark(reference_states());
        cfg.initial_states[3].role = Role::Informed;
        match cfg.validate().unwrap_err() {
            Error::InvalidConfig(msg) => assert!(msg.contains("exactly one informed robot")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rendezvous_radius_must_cover_the_chain() {
        let mut cfg = ScenarioConfig::benchmark(reference_states());
        cfg.rendezvous_radius = 10.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn workspace_must_dwarf_rendezvous_region() {
        let mut cfg = ScenarioConfig::benchmark(reference_states());
        cfg.workspace_radius = 20.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn robot_outside_workspace_is_rejected() {
        let mut cfg = ScenarioConfig::benchmark(reference_states());
        cfg.initial_states[2].position = Vec2::new(50.0, 0.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn epsilon_range_and_gain_count() {
        let mut cfg = ScenarioConfig::benchmark(reference_states());
        cfg.sigmoid_eps = 0.5;
        assert!(cfg.clone().validate().is_err());
        cfg.sigmoid_eps = 0.01;
        cfg.k_v = vec![1.0; 5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert!((normalize_angle(1.5 * PI).unwrap() + PI / 2.0).abs() < 1e-15);
        assert_eq!(normalize_angle(-PI).unwrap(), PI);
        assert_eq!(normalize_angle(PI).unwrap(), PI);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_in_range(theta in -1e4f64..1e4) {
            let a = normalize_angle(theta).unwrap();
            prop_assert!(a > -PI && a <= PI);
            prop_assert_eq!(normalize_angle(a).unwrap(), a);
            // same class mod 2π
            let k = libm::round((theta - a) / TAU);
            prop_assert!((theta - a - k * TAU).abs() < 1e-9);
        }
    }
}
