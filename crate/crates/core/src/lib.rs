//! Decentralized rendezvous of unicycle robots steered by navigation
//! functions.
//!
//! One informed robot follows a dipolar field toward a goal pose, every
//! other robot follows a field built from its neighbors' positions. The
//! crate covers the fields and their derivatives, the sensing graph, the
//! controller and a fixed-step simulator. It is `no_std` and needs only
//! `alloc`.

#![no_std]

extern crate alloc;

pub mod controller;
pub mod diff;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod model;
pub mod navfield;
pub mod sim;

pub use controller::{compute_control, ControlOutput, Gains, Saturation};
pub use error::{Error, Result};
pub use geometry::{Mat2, Vec2};
pub use graph::{build_topology, has_rooted_spanning_tree, laplacian, Topology};
pub use model::{
    normalize_angle, ControlUpdate, GradientMode, Integrator, NeighborMode, Region, RobotState,
    Role, ScenarioConfig,
};
pub use navfield::{FieldEval, FieldParams};
pub use sim::{compute_metrics, run, Metrics, RunOptions, Simulation, StepRecord, TrajectoryLog};
