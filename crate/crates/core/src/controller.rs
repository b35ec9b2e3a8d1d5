//! Gradient-tracking unicycle controller. Each robot steers toward the
//! negative gradient of its own navigation function and drives forward
//! with the projection of that gradient on its heading.

use crate::diff::{evaluate_field, EvalOptions, GradientBundle};
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::model::{normalize_angle, Region, RobotState, Role};
use crate::navfield::{FieldEval, FieldParams};

/// Inputs and heading quantities of one robot at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    /// Linear velocity, m/s. Negative means reversing.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
    pub desired_heading: f64,
    /// `normalize(θ − θ_d)`
    pub heading_error: f64,
    /// Feedforward `θ̇_d`, rad/s.
    pub desired_heading_rate: f64,
    /// The gradient was below `grad_tol` and `θ_d` was held.
    pub heading_held: bool,
}

impl ControlOutput {
    pub const IDLE: ControlOutput = ControlOutput {
        v: 0.0,
        omega: 0.0,
        desired_heading: 0.0,
        heading_error: 0.0,
        desired_heading_rate: 0.0,
        heading_held: false,
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gains {
    pub k_v: f64,
    pub k_w: f64,
}

/// Optional actuator limits. `None` leaves the input untouched.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Saturation {
    pub max_speed: Option<f64>,
    pub max_turn_rate: Option<f64>,
}

impl Saturation {
    fn apply(&self, v: f64, omega: f64) -> (f64, f64) {
        let clamp = |x: f64, lim: Option<f64>| lim.map_or(x, |l| x.clamp(-l, l));
        (clamp(v, self.max_speed), clamp(omega, self.max_turn_rate))
    }
}

/// Direction of steepest descent, `atan2(−∂φ/∂y, −∂φ/∂x)`. Below
/// `grad_tol` the previous desired heading is kept, or the current heading
/// when there is none.
pub fn desired_heading(grad: Vec2, heading: f64, previous: Option<f64>, grad_tol: f64) -> f64 {
    if grad.norm() > grad_tol {
        // atan2 can return -π for a signed zero
        normalize_angle(libm::atan2(-grad.y, -grad.x)).unwrap_or(heading)
    } else {
        previous.unwrap_or(heading)
    }
}

/// `v = k_v ‖∇φ‖ cos θ̃`
pub fn linear_velocity(grad: Vec2, heading_error: f64, k_v: f64) -> f64 {
    k_v * grad.norm() * libm::cos(heading_error)
}

/// `θ̇_d = k_v cos θ̃ [sin θ_d, −cos θ_d] ∇²φ [cos θ, sin θ]ᵀ`
pub fn heading_feedforward(
    desired_heading: f64,
    hessian: &Mat2,
    heading: f64,
    heading_error: f64,
    k_v: f64,
) -> f64 {
    let left = Vec2::new(libm::sin(desired_heading), -libm::cos(desired_heading));
    let right = Vec2::from_angle(heading);
    k_v * libm::cos(heading_error) * hessian.quadratic_form(left, right)
}

/// `ω = −k_w θ̃ + θ̇_d`
pub fn angular_velocity(heading_error: f64, desired_heading_rate: f64, k_w: f64) -> f64 {
    -k_w * heading_error + desired_heading_rate
}

/// Everything a robot needs besides its own pose to compute its inputs.
#[derive(Clone, Copy, Debug)]
pub struct ControlContext<'a> {
    pub region: Region,
    pub params: &'a FieldParams,
    pub eval: &'a EvalOptions,
    pub grad_tol: f64,
    pub saturation: Saturation,
}

/// Full per-robot pipeline: field, desired heading, heading error,
/// feedforward and both inputs. While the desired heading is held it has
/// zero rate and `v` is the projection `−k_v ∇φ·(cos θ, sin θ)`. The informed robot uses the dipolar field
/// and ignores `neighbors`.
pub fn compute_control(
    robot: &RobotState,
    neighbors: &[Vec2],
    gains: Gains,
    previous_desired: Option<f64>,
    ctx: &ControlContext<'_>,
) -> Result<(ControlOutput, FieldEval, Option<GradientBundle>)> {
    if robot.role == Role::Follower && neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood {
            robot: Some(robot.id),
        });
    }
    let (field, bundle) = evaluate_field(
        robot.role,
        robot.position,
        neighbors,
        ctx.region,
        ctx.params,
        ctx.eval,
    )?;
    let heading = normalize_angle(robot.heading)?;
    let held = field.gradient.norm() <= ctx.grad_tol;
    let theta_d = desired_heading(field.gradient, heading, previous_desired, ctx.grad_tol);
    let error = normalize_angle(heading - theta_d)?;
    // with θ_d held the cosine form loses the gradient's sign
    let v = if held {
        -gains.k_v * field.gradient.dot(Vec2::from_angle(heading))
    } else {
        linear_velocity(field.gradient, error, gains.k_v)
    };
    let rate = if held {
        0.0
    } else {
        heading_feedforward(theta_d, &field.hessian, heading, error, gains.k_v)
    };
    let omega = angular_velocity(error, rate, gains.k_w);
    let (v, omega) = ctx.saturation.apply(v, omega);
    Ok((
        ControlOutput {
            v,
            omega,
            desired_heading: theta_d,
            heading_error: error,
            desired_heading_rate: rate,
            heading_held: held,
        },
        field,
        bundle,
    ))
}
