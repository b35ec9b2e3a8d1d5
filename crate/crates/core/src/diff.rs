//! Analytic gradients of the navigation functions, the edgewise coupling
//! weights of the follower gradient, and central finite-difference
//! oracles for gradients and Hessians.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::model::{GradientMode, Region, Role};
use crate::navfield::{
    boundary_factor, constraint_follower, dipolar_factor_axis, goal_follower, logistic,
    navfunc_follower, navfunc_leader, sigmoid_collision, sigmoid_connectivity, sigmoid_slope,
    FieldEval, FieldParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMethod {
    Analytic,
    FiniteDifference,
}

/// Follower gradient in both quotient-rule and edgewise form.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    /// Quotient-rule gradient of φ_f.
    pub grad_phi: Vec2,
    /// `m_ij`, in the order of the neighbor slice passed in.
    pub weights: Vec<f64>,
    pub method: GradientMethod,
}

impl GradientBundle {
    /// `Σ_j m_ij (p_i − p_j)`
    pub fn edgewise_gradient(&self, p: Vec2, neighbors: &[Vec2]) -> Vec2 {
        self.weights
            .iter()
            .zip(neighbors)
            .fold(Vec2::ZERO, |acc, (&m, &q)| acc + (p - q) * m)
    }
}

/// `σ'(z) = σ(z) σ(−z)`, accurate in both tails.
#[inline]
fn logistic_slope(z: f64) -> f64 {
    logistic(z) * logistic(-z)
}

/// `∂b_ij/∂d_ij`, always ≤ 0.
pub fn d_sigmoid_connectivity(d: f64, sensing_radius: f64, buffer: f64, eps: f64) -> f64 {
    let k = sigmoid_slope(buffer, eps);
    -k * logistic_slope(k * (sensing_radius - 0.5 * buffer - d))
}

/// `∂B_ij/∂d_ij`, always ≥ 0. Also the derivative of the boundary factor
/// with respect to its clearance.
pub fn d_sigmoid_collision(d: f64, margin: f64, eps: f64) -> f64 {
    let k = sigmoid_slope(margin, eps);
    k * logistic_slope(k * (d - 0.5 * margin))
}

/// `∇γ_i = 2 Σ_j (p − p_j)`
pub fn grad_goal_follower(p: Vec2, neighbors: &[Vec2]) -> Result<Vec2> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood { robot: None });
    }
    Ok(neighbors
        .iter()
        .fold(Vec2::ZERO, |acc, &q| acc + (p - q) * 2.0))
}

/// Per-neighbor scalar `s_j` with `∇β_i = Σ_j s_j (p − p_j)`. Edges
/// shorter than `d_min` contribute zero.
fn constraint_edge_scalars(
    p: Vec2,
    neighbors: &[Vec2],
    region: Region,
    params: &FieldParams,
    mode: GradientMode,
    d_min: f64,
) -> Vec<f64> {
    let dist: Vec<f64> = neighbors.iter().map(|&q| p.distance(q)).collect();
    let conn = |d: f64| {
        sigmoid_connectivity(
            d,
            params.sensing_radius,
            params.connectivity_buffer,
            params.eps,
        )
    };
    let d_conn = |d: f64| {
        d_sigmoid_connectivity(
            d,
            params.sensing_radius,
            params.connectivity_buffer,
            params.eps,
        )
    };
    // (factor, derivative) per edge
    let per_edge: Vec<(f64, f64)> = match (mode, region) {
        (GradientMode::Paper, _) | (GradientMode::Full, Region::Rendezvous) => {
            dist.iter().map(|&d| (conn(d), d_conn(d))).collect()
        }
        (GradientMode::Full, Region::CollisionFree) => dist
            .iter()
            .map(|&d| {
                let (b, db) = (conn(d), d_conn(d));
                let big = sigmoid_collision(d, params.collision_margin, params.eps);
                let dbig = d_sigmoid_collision(d, params.collision_margin, params.eps);
                (b * big, db * big + b * dbig)
            })
            .collect(),
    };
    let scale = match mode {
        GradientMode::Full => 1.0,
        GradientMode::Paper => 2.0,
    };
    (0..neighbors.len())
        .map(|j| {
            if dist[j] < d_min {
                return 0.0;
            }
            let others: f64 = per_edge
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, &(c, _))| c)
                .product();
            scale * per_edge[j].1 * others / dist[j]
        })
        .collect()
}

/// `∇β_i`. In `Full` mode this is the exact derivative of
/// [`constraint_follower`]; `Paper` mode differentiates only the
/// connectivity factors and keeps the leading factor of 2.
pub fn grad_constraint_follower(
    p: Vec2,
    neighbors: &[Vec2],
    region: Region,
    params: &FieldParams,
    mode: GradientMode,
    d_min: f64,
) -> Vec2 {
    constraint_edge_scalars(p, neighbors, region, params, mode, d_min)
        .iter()
        .zip(neighbors)
        .fold(Vec2::ZERO, |acc, (&s, &q)| acc + (p - q) * s)
}

/// Gradient of φ_f by the quotient rule together with the coupling
/// weights `m_ij = (2αβ − γ s_j) / (α (γ^α + β)^{1/α+1})`.
pub fn grad_navfunc_follower(
    p: Vec2,
    neighbors: &[Vec2],
    region: Region,
    params: &FieldParams,
    mode: GradientMode,
    d_min: f64,
) -> Result<GradientBundle> {
    let gamma = goal_follower(p, neighbors)?;
    let beta = constraint_follower(p, neighbors, region, params);
    let alpha = params.alpha;
    let scalars = constraint_edge_scalars(p, neighbors, region, params, mode, d_min);
    let grad_gamma = grad_goal_follower(p, neighbors)?;
    let grad_beta = scalars
        .iter()
        .zip(neighbors)
        .fold(Vec2::ZERO, |acc, (&s, &q)| acc + (p - q) * s);

    let denom = alpha * libm::pow(libm::pow(gamma, alpha) + beta, 1.0 / alpha + 1.0);
    let grad_phi = if gamma == 0.0 {
        Vec2::ZERO
    } else {
        (grad_gamma * (alpha * beta) - grad_beta * gamma) / denom
    };
    let weights = scalars
        .iter()
        .map(|&s| (2.0 * alpha * beta - gamma * s) / denom)
        .collect();
    Ok(GradientBundle {
        grad_phi,
        weights,
        method: GradientMethod::Analytic,
    })
}

/// Gradient of the dipolar navigation function.
pub fn grad_navfunc_leader(p: Vec2, params: &FieldParams) -> Vec2 {
    let offset = p - params.goal;
    let gamma = offset.norm_sq();
    if gamma == 0.0 {
        return Vec2::ZERO;
    }
    let alpha = params.alpha;
    let grad_gamma = offset * 2.0;

    let along = offset.dot(params.goal_axis);
    let h = dipolar_factor_axis(p, params.goal, params.goal_axis, params.dipole_eps);
    let grad_h = params.goal_axis * (2.0 * along);

    let radius = p.norm();
    let clearance = params.workspace_radius - radius;
    let beta = boundary_factor(clearance, params.collision_margin, params.eps);
    let grad_beta = if radius == 0.0 {
        Vec2::ZERO
    } else {
        p * (-d_sigmoid_collision(clearance, params.collision_margin, params.eps) / radius)
    };

    let q = h * beta;
    let grad_q = grad_h * beta + grad_beta * h;
    let denom = alpha * libm::pow(libm::pow(gamma, alpha) + q, 1.0 / alpha + 1.0);
    (grad_gamma * (alpha * q) - grad_q * gamma) / denom
}

fn checked(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("finite-difference sample"))
    }
}

/// Central-difference gradient with step `h` on each axis.
pub fn fd_gradient<F: Fn(Vec2) -> f64>(f: F, p: Vec2, h: f64) -> Result<Vec2> {
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    let gx = (checked(f(p + ex))? - checked(f(p - ex))?) / (2.0 * h);
    let gy = (checked(f(p + ey))? - checked(f(p - ey))?) / (2.0 * h);
    Ok(Vec2::new(gx, gy))
}

/// Central second differences without symmetrization. The two mixed
/// entries use different stencils (corner and axis-plus-diagonal), so
/// their gap measures the discretization error.
pub fn fd_hessian_raw<F: Fn(Vec2) -> f64>(f: F, p: Vec2, h: f64) -> Result<Mat2> {
    let at = |dx: f64, dy: f64| checked(f(p + Vec2::new(dx * h, dy * h)));
    let c = at(0.0, 0.0)?;
    let (xp, xm) = (at(1.0, 0.0)?, at(-1.0, 0.0)?);
    let (yp, ym) = (at(0.0, 1.0)?, at(0.0, -1.0)?);
    let (pp, mm) = (at(1.0, 1.0)?, at(-1.0, -1.0)?);
    let (pm, mp) = (at(1.0, -1.0)?, at(-1.0, 1.0)?);
    let h2 = h * h;
    let hxx = (xp - 2.0 * c + xm) / h2;
    let hyy = (yp - 2.0 * c + ym) / h2;
    let corner = (pp - pm - mp + mm) / (4.0 * h2);
    let diagonal = (pp + mm - xp - xm - yp - ym + 2.0 * c) / (2.0 * h2);
    Ok(Mat2::new(hxx, corner, diagonal, hyy))
}

/// Central-difference Hessian with the mixed entries averaged.
pub fn fd_hessian<F: Fn(Vec2) -> f64>(f: F, p: Vec2, h: f64) -> Result<Mat2> {
    let mut m = fd_hessian_raw(f, p, h)?;
    let mixed = 0.5 * (m.m[0][1] + m.m[1][0]);
    m.m[0][1] = mixed;
    m.m[1][0] = mixed;
    Ok(m)
}

/// Settings shared by every field evaluation of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub gradient_mode: GradientMode,
    pub d_min: f64,
    pub hessian_step: f64,
}

/// Value, analytic gradient and finite-difference Hessian of a robot's
/// navigation function. Followers also return their coupling weights.
pub fn evaluate_field(
    role: Role,
    p: Vec2,
    neighbors: &[Vec2],
    region: Region,
    params: &FieldParams,
    opts: &EvalOptions,
) -> Result<(FieldEval, Option<GradientBundle>)> {
    match role {
        Role::Informed => {
            let value = navfunc_leader(p, params);
            let gradient = grad_navfunc_leader(p, params);
            let hessian = fd_hessian(|x| navfunc_leader(x, params), p, opts.hessian_step)?;
            Ok((
                FieldEval {
                    value,
                    gradient,
                    hessian,
                    region,
                },
                None,
            ))
        }
        Role::Follower => {
            let value = navfunc_follower(p, neighbors, region, params)?;
            let bundle = grad_navfunc_follower(
                p,
                neighbors,
                region,
                params,
                opts.gradient_mode,
                opts.d_min,
            )?;
            let hessian = fd_hessian(
                |x| navfunc_follower(x, neighbors, region, params).unwrap_or(f64::NAN),
                p,
                opts.hessian_step,
            )?;
            Ok((
                FieldEval {
                    value,
                    gradient: bundle.grad_phi,
                    hessian,
                    region,
                },
                Some(bundle),
            ))
        }
    }
}
