//! Gradient-based planning over differentiable world models.
//!
//! The crate provides four planners over a common [`worldmodel::WorldModel`]
//! abstraction: shooting gradient descent, lifted (multiple-shooting)
//! gradient descent, GRASP (stop-gradient lifted states with Langevin-style
//! state noise and periodic rollout synchronization) and the cross-entropy
//! method. Alongside them sit closed-form checks for the linear-system
//! conditioning results that motivate the lifted formulation, and a
//! benchmark harness producing deterministic JSON/CSV reports.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the theory checks and the harness use.

pub mod error;
pub mod harness;
pub mod numerics;
pub mod objectives;
pub mod planners;
pub mod theory;
pub mod worldmodel;

pub use error::{Error, Result};
pub use numerics::{Real, RngStream};

/// Double-precision dense matrix.
pub type Matrix = numerics::DenseMatrix<f64>;
pub type Linear = worldmodel::LinearModel<f64>;
pub type Mlp = worldmodel::MlpModel<f64>;
pub type Walls = worldmodel::WallWorld<f64>;
pub type Model = worldmodel::AnyModel<f64>;
pub type Traj = worldmodel::Trajectory<f64>;
pub type Problem<'a> = objectives::PlanProblem<'a, f64>;
pub type Plan = planners::PlanResult<f64>;
