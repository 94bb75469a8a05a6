//! Galerkin projection onto the retained eigenmodes, Crank-Nicolson
//! integration of the linear auxiliary problem and a nonlinear reference
//! integrator.

mod integrate;
mod reference;
mod system;
mod trajectory;

pub use integrate::{integrate_linear, solve_auxiliary, step_grid, CrankNicolson, Forcing};
pub use reference::{integrate_reference, ReferenceConfig};
pub use system::{assemble, multiplication_matrix, OdeSystem};
pub use trajectory::{Trajectory, TrajectoryMeta};
