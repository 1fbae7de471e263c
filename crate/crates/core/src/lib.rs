//! Multiscale solvers for time-fractional diffusion in high-contrast media.
//!
//! The crate discretizes `∂ₜ^α u = ∇·(κ∇u) + f` on the unit square with the L1
//! Caputo scheme in time and Q1 finite elements in space, builds constraint
//! energy minimizing coarse spaces, and advances the solution with implicit,
//! explicit, or partially explicit time stepping.

pub mod error;
pub mod grid;
pub mod fractional;
pub mod linalg;
pub mod assembly;
pub mod spaces;
pub mod schemes;
pub mod stability;
pub mod harness;

pub use error::{Error, Result};
