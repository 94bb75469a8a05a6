//! Nonlinear solve by Picard iteration of the auxiliary-problem map on a
//! covering of the horizon, with the ball, invariance and contraction
//! conditions that certify each subinterval, and the mollified path for
//! rough data.

mod ball;
mod operator;
mod regularized;
mod schedule;
mod solve;

pub use ball::{ball_radius, contraction_factor, invariance_bound, nonlinear_bound, ContractionInputs, NonlinearConstants};
pub use operator::{apply_A, picard_solve, y_hat_distance, FixedPointProblem, PicardLog};
pub use regularized::{
    probe_potential_constants, regularization_input, smooth_problem, solve_regularized, uniform_bounds, y_distance, RegularizedReport, RegularizedSetup,
    Smoothed, UniformBounds,
};
pub use schedule::{ball_radius_k, covering_schedule, plan_step, BallPolicy, ScheduleState};
pub use solve::{solve_tdks, Mode, SolveOptions, SolveReport, SubintervalReport, TdksProblem};

#[cfg(test)]
mod tests;
