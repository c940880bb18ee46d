//! Hybrid force-velocity control synthesis for quasi-static rigid-body
//! systems under contact.
//!
//! Given one time step's holonomic constraints, goal velocity and guard
//! conditions, the solver decides how many actuated directions to
//! velocity-control and how many to force-control, picks their axes, and
//! computes the command magnitudes:
//!
//! 1. [`velocity::solve_velocity`] fixes `n_av`, the command rows `C`, the
//!    action frame `T` and the velocity magnitudes `w_av`.
//! 2. [`force::solve_force`] fixes the force command `η_af` by maximizing the
//!    worst guard margin over the equilibrium-consistent reaction forces.
//!
//! [`tilting`] builds instances for a block being tilted about one edge by a
//! point finger, and [`verify`] checks solutions from raw inputs.

pub mod error;
pub mod force;
pub mod linalg;
pub mod model;
pub mod random;
pub mod run;
pub mod scenario;
pub mod tilting;
pub mod velocity;
pub mod verify;

pub use error::{Error, Result};
