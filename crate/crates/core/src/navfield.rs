//! Scalar potentials: sigmoid constraint factors, the leader's dipolar
//! navigation function and the followers' consensus navigation function.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::model::{Region, RobotState, ScenarioConfig};

/// Field constants derived from a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldParams {
    pub alpha: f64,
    pub eps: f64,
    pub dipole_eps: f64,
    pub collision_margin: f64,
    pub connectivity_buffer: f64,
    pub sensing_radius: f64,
    pub workspace_radius: f64,
    pub rendezvous_radius: f64,
    pub goal: Vec2,
    pub goal_heading: f64,
    /// `[cos θ*, sin θ*]`
    pub goal_axis: Vec2,
    pub n_robots: usize,
}

impl FieldParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        FieldParams {
            alpha: cfg.alpha,
            eps: cfg.sigmoid_eps,
            dipole_eps: cfg.dipole_eps,
            collision_margin: cfg.collision_margin,
            connectivity_buffer: cfg.connectivity_buffer,
            sensing_radius: cfg.sensing_radius,
            workspace_radius: cfg.workspace_radius,
            rendezvous_radius: cfg.rendezvous_radius,
            goal: cfg.goal,
            goal_heading: cfg.goal_heading,
            goal_axis: Vec2::from_angle(cfg.goal_heading),
            n_robots: cfg.n,
        }
    }

    /// `R_r − R (N − 1)`
    pub fn switch_distance(&self) -> f64 {
        self.rendezvous_radius - self.sensing_radius * (self.n_robots.saturating_sub(1)) as f64
    }
}

/// Result of evaluating one robot's navigation function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldEval {
    pub value: f64,
    pub gradient: Vec2,
    pub hessian: crate::geometry::Mat2,
    pub region: Region,
}

#[inline]
pub(crate) fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Steepness `(2/δ) ln((1−ε)/ε)` that maps a band of width δ onto
/// sigmoid values ε and 1−ε.
#[inline]
pub fn sigmoid_slope(width: f64, eps: f64) -> f64 {
    2.0 / width * libm::log((1.0 - eps) / eps)
}

/// Connectivity factor `b_ij`: 1−ε at `d = R − δ2`, ε at `d = R`.
pub fn sigmoid_connectivity(d: f64, sensing_radius: f64, buffer: f64, eps: f64) -> f64 {
    logistic(sigmoid_slope(buffer, eps) * (sensing_radius - 0.5 * buffer - d))
}

/// Collision factor `B_ij`: ε at contact, 1−ε at `d = δ1`.
pub fn sigmoid_collision(d: f64, margin: f64, eps: f64) -> f64 {
    logistic(sigmoid_slope(margin, eps) * (d - 0.5 * margin))
}

/// Workspace-boundary factor `β_d` of the leader, with `d_i0 = R_w − ‖p‖`.
pub fn boundary_factor(clearance: f64, margin: f64, eps: f64) -> f64 {
    sigmoid_collision(clearance, margin, eps)
}

/// `γ_d = ‖p − p*‖²`
pub fn goal_leader(p: Vec2, goal: Vec2) -> f64 {
    (p - goal).norm_sq()
}

/// `H_d = ε_nh + ((p − p*)·n_d)²`
pub fn dipolar_factor(p: Vec2, goal: Vec2, goal_heading: f64, dipole_eps: f64) -> f64 {
    dipolar_factor_axis(p, goal, Vec2::from_angle(goal_heading), dipole_eps)
}

#[inline]
pub(crate) fn dipolar_factor_axis(p: Vec2, goal: Vec2, axis: Vec2, dipole_eps: f64) -> f64 {
    let s = (p - goal).dot(axis);
    dipole_eps + s * s
}

/// `γ_i = Σ_j ‖p − p_j‖²`
pub fn goal_follower(p: Vec2, neighbors: &[Vec2]) -> Result<f64> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood { robot: None });
    }
    Ok(neighbors.iter().map(|&q| (p - q).norm_sq()).sum())
}

/// Per-edge constraint factor: `b_ij B_ij` in the collision-free region,
/// `b_ij` in the rendezvous region.
pub fn edge_factor(d: f64, region: Region, params: &FieldParams) -> f64 {
    let b = sigmoid_connectivity(
        d,
        params.sensing_radius,
        params.connectivity_buffer,
        params.eps,
    );
    match region {
        Region::CollisionFree => b * sigmoid_collision(d, params.collision_margin, params.eps),
        Region::Rendezvous => b,
    }
}

/// `β_i`, the product of edge factors over the neighbor set.
pub fn constraint_follower(
    p: Vec2,
    neighbors: &[Vec2],
    region: Region,
    params: &FieldParams,
) -> f64 {
    neighbors
        .iter()
        .map(|&q| edge_factor(p.distance(q), region, params))
        .product()
}

/// `γ / (γ^α + β)^{1/α}`, zero when `γ = 0`.
#[inline]
pub(crate) fn navigation_ratio(goal_term: f64, constraint: f64, alpha: f64) -> f64 {
    if goal_term == 0.0 {
        return 0.0;
    }
    let denom = libm::pow(goal_term, alpha) + constraint;
    goal_term / libm::pow(denom, 1.0 / alpha)
}

/// Dipolar navigation function of the informed robot.
pub fn navfunc_leader(p: Vec2, params: &FieldParams) -> f64 {
    let gamma = goal_leader(p, params.goal);
    let h = dipolar_factor_axis(p, params.goal, params.goal_axis, params.dipole_eps);
    let beta = boundary_factor(
        params.workspace_radius - p.norm(),
        params.collision_margin,
        params.eps,
    );
    navigation_ratio(gamma, h * beta, params.alpha)
}

/// Consensus navigation function of a follower.
pub fn navfunc_follower(
    p: Vec2,
    neighbors: &[Vec2],
    region: Region,
    params: &FieldParams,
) -> Result<f64> {
    let gamma = goal_follower(p, neighbors)?;
    let beta = constraint_follower(p, neighbors, region, params);
    Ok(navigation_ratio(gamma, beta, params.alpha))
}

/// Latched region update: once the leader comes within the switch
/// distance of the goal the group stays in the rendezvous region.
pub fn region_of(leader: &RobotState, current: Region, params: &FieldParams) -> Region {
    match current {
        Region::Rendezvous => Region::Rendezvous,
        Region::CollisionFree => {
            if leader.position.distance(params.goal) < params.switch_distance() {
                Region::Rendezvous
            } else {
                Region::CollisionFree
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn reference_params() -> FieldParams {
        FieldParams {
            alpha: 1.2,
            eps: 0.01,
            dipole_eps: 0.01,
            collision_margin: 0.4,
            connectivity_buffer: 0.4,
            sensing_radius: 2.0,
            workspace_radius: 50.0,
            rendezvous_radius: 11.5,
            goal: Vec2::ZERO,
            goal_heading: 0.0,
            goal_axis: Vec2::new(1.0, 0.0),
            n_robots: 6,
        }
    }

    #[test]
    fn connectivity_sigmoid_figure_values() {
        assert!((sigmoid_connectivity(1.5, 2.0, 1.0, 0.01) - 0.5).abs() < 1e-15);
        assert!((sigmoid_connectivity(2.0, 2.0, 1.0, 0.01) - 0.01).abs() < 1e-12);
        assert!((sigmoid_connectivity(1.0, 2.0, 1.0, 0.01) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn collision_sigmoid_figure_values() {
        assert!((sigmoid_collision(0.25, 0.5, 0.01) - 0.5).abs() < 1e-15);
        assert!((sigmoid_collision(0.0, 0.5, 0.01) - 0.01).abs() < 1e-12);
        assert!((sigmoid_collision(0.5, 0.5, 0.01) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn boundary_factor_shape() {
        assert!((boundary_factor(0.2, 0.4, 0.01) - 0.5).abs() < 1e-15);
        assert!((boundary_factor(0.0, 0.4, 0.01) - 0.01).abs() < 1e-12);
        assert!(boundary_factor(0.4, 0.4, 0.01) >= 0.99 - 1e-12);
        assert!(boundary_factor(0.8, 0.4, 0.01) > 0.99);
        assert!(boundary_factor(40.0, 0.4, 0.01) > 1.0 - 1e-12);
    }

    #[test]
    fn leader_goal_term() {
        assert_eq!(goal_leader(Vec2::new(1.0, 2.0), Vec2::new(1.0, 2.0)), 0.0);
        assert_eq!(goal_leader(Vec2::new(3.0, 4.0), Vec2::ZERO), 25.0);
        let c = Vec2::new(-7.5, 2.25);
        let (p, g) = (Vec2::new(3.0, 4.0), Vec2::new(0.5, -1.0));
        assert!((goal_leader(p + c, g + c) - goal_leader(p, g)).abs() < 1e-12);
    }

    #[test]
    fn dipolar_factor_examples() {
        let f = |x, y| dipolar_factor(Vec2::new(x, y), Vec2::ZERO, 0.0, 0.01);
        assert!((f(0.0, 5.0) - 0.01).abs() < 1e-15);
        assert!((f(2.0, 0.0) - 4.01).abs() < 1e-15);
        assert!((f(0.0, 0.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn follower_goal_term() {
        let p = Vec2::new(1.0, 1.0);
        assert_eq!(goal_follower(p, &[p, p]).unwrap(), 0.0);
        let two = [Vec2::new(2.0, 1.0), Vec2::new(1.0, 3.0)];
        assert_eq!(goal_follower(p, &two).unwrap(), 5.0);
        let q = Vec2::new(-0.3, 4.0);
        assert_eq!(goal_follower(p, &[q]).unwrap(), goal_leader(p, q));
        assert_eq!(
            goal_follower(p, &[]).unwrap_err(),
            Error::EmptyNeighborhood { robot: None }
        );
    }

    #[test]
    fn constraint_products() {
        let params = reference_params();
        let p = Vec2::ZERO;
        let mid = Vec2::new(
            params.sensing_radius - params.connectivity_buffer / 2.0,
            0.0,
        );
        assert!((constraint_follower(p, &[mid], Region::Rendezvous, &params) - 0.5).abs() < 1e-15);

        // collision midpoint with b deep inside range
        let q = Vec2::new(0.2, 0.0);
        let b = sigmoid_connectivity(0.2, 2.0, 0.4, 0.01);
        let oracle = 0.5 * b;
        assert!(b > 0.99);
        let beta = constraint_follower(p, &[q], Region::CollisionFree, &params);
        assert!((beta - oracle).abs() < 1e-15);
        // b sits a little above 1 − ε here
        assert!((beta - 0.5 * 0.99).abs() <= 0.5 * 0.01 + 1e-9);

        // b = B = 0.99 at d = 1 when R = 2, δ1 = δ2 = 1
        let wide = FieldParams {
            collision_margin: 1.0,
            connectivity_buffer: 1.0,
            ..params
        };
        let pair = [Vec2::new(1.0, 0.0), Vec2::new(0.0, -1.0)];
        let beta = constraint_follower(p, &pair, Region::CollisionFree, &wide);
        assert!((beta - libm::pow(0.99, 4.0)).abs() < 1e-12);
        assert!((beta - 0.9606).abs() < 1e-4);
    }

    #[test]
    fn leader_function_examples() {
        let params = reference_params();
        assert_eq!(navfunc_leader(Vec2::ZERO, &params), 0.0);
        assert_eq!(navigation_ratio(1.0, 1.0, 1.0), 0.5);

        // second implementation of the dipolar formula
        let p = Vec2::new(10.0, 0.0);
        let gamma: f64 = 100.0;
        let h = 0.01 + 100.0;
        let k = 2.0 / 0.4 * (99.0f64).ln();
        let beta = 1.0 / (1.0 + (-k * (40.0 - 0.2)).exp());
        let oracle = gamma / (gamma.powf(1.2) + h * beta).powf(1.0 / 1.2);
        assert!((navfunc_leader(p, &params) - oracle).abs() < 1e-14);
        assert!((oracle - 0.756321).abs() < 1e-6);
    }

    #[test]
    fn follower_function_examples() {
        let params = reference_params();
        let p = Vec2::new(3.0, -1.0);
        assert_eq!(
            navfunc_follower(p, &[p], Region::CollisionFree, &params).unwrap(),
            0.0
        );

        // single neighbor at d = R: b = ε
        let q = p + Vec2::new(0.0, 2.0);
        let value = navfunc_follower(p, &[q], Region::Rendezvous, &params).unwrap();
        let gamma: f64 = 4.0;
        let oracle = gamma / (gamma.powf(1.2) + 0.01).powf(1.0 / 1.2);
        assert!((value - oracle).abs() < 1e-14);
        assert!(value > 0.998 && value < 1.0);
    }

    #[test]
    fn region_switch_is_latched() {
        let params = reference_params();
        let at = |d: f64| RobotState::new(1, Vec2::new(d, 0.0), 0.0, Role::Informed);
        assert!((params.switch_distance() - 1.5).abs() < 1e-12);
        assert_eq!(
            region_of(&at(1.4), Region::CollisionFree, &params),
            Region::Rendezvous
        );
        assert_eq!(
            region_of(&at(1.6), Region::CollisionFree, &params),
            Region::CollisionFree
        );
        let first = region_of(&at(1.4), Region::CollisionFree, &params);
        assert_eq!(region_of(&at(1.6), first, &params), Region::Rendezvous);
    }

    #[test]
    fn sigmoids_are_monotone_on_a_grid() {
        let grid: Vec<f64> = (0..=600).map(|k| k as f64 * 0.005).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ba, bb) = (
                sigmoid_connectivity(a, 2.0, 0.4, 0.01),
                sigmoid_connectivity(b, 2.0, 0.4, 0.01),
            );
            let (ca, cb) = (
                sigmoid_collision(a, 0.4, 0.01),
                sigmoid_collision(b, 0.4, 0.01),
            );
            assert!(bb <= ba && cb >= ca);
            // strict inside the active bands, where the values are not saturated
            if a >= 1.4 && b <= 2.2 {
                assert!(bb < ba);
            }
            if b <= 0.6 {
                assert!(cb > ca);
            }
        }
    }

    proptest! {
        #[test]
        fn follower_value_is_translation_invariant(
            px in -5.0f64..5.0, py in -5.0f64..5.0,
            offs in proptest::collection::vec((-1.4f64..1.4, -1.4f64..1.4), 1..5),
            cx in -20.0f64..20.0, cy in -20.0f64..20.0,
        ) {
            let params = reference_params();
            let p = Vec2::new(px, py);
            let c = Vec2::new(cx, cy);
            let nbrs: Vec<Vec2> = offs.iter().map(|&(x, y)| p + Vec2::new(x, y)).collect();
            let moved: Vec<Vec2> = nbrs.iter().map(|&q| q + c).collect();
            let a = navfunc_follower(p, &nbrs, Region::Rendezvous, &params).unwrap();
            let b = navfunc_follower(p + c, &moved, Region::Rendezvous, &params).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn switching_never_raises_follower_value(
            offs in proptest::collection::vec((-1.9f64..1.9, -1.9f64..1.9), 1..6),
        ) {
            let params = reference_params();
            let p = Vec2::ZERO;
            let nbrs: Vec<Vec2> = offs.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let c = navfunc_follower(p, &nbrs, Region::CollisionFree, &params).unwrap();
            let r = navfunc_follower(p, &nbrs, Region::Rendezvous, &params).unwrap();
            prop_assert!(r <= c);
        }
    }
}
