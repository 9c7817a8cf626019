//! Rigid-body simulation with planar, possibly non-convex contact patches.
//!
//! Each time step solves one mixed nonlinear complementarity problem that
//! couples the discretized Newton-Euler equations with the contact geometry.
//! Contact is modelled through an equivalent contact point on the convex hull
//! of the moving body, so a patch of any shape (several feet, a T-shaped
//! face, a line or a single vertex) is handled by the same equations.

pub mod contact;
pub mod error;
pub mod geometry;
pub mod oracles;
pub mod scenario;
pub mod se3;
pub mod solver;
pub mod stepper;
pub mod trajectory;
pub mod cli;

pub use contact::{ContactVariables, FrictionParams, StepUnknowns};
pub use error::{Error, Result};
pub use geometry::{convex_hull, ConvexPolytope, SupportPlane};
pub use scenario::{Scenario, WrenchProfile};
pub use se3::{InertialProperties, RigidState};
pub use solver::{SolveReport, SolverConfig};
pub use stepper::{ContactMode, Simulator, TrajectoryRecord};
