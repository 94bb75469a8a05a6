//! Explicit energy-estimate constants and their verification along computed
//! trajectories.

mod check;
mod constants;

pub use check::{check_estimates, EstimateReport, EstimateRow, EstimateSummary, Variant};
pub use constants::{
    constants, constants_from_norms, poincare_constant, EstimateConstants, LemmaConstants, RegularizationInput,
    RegularizedConstants,
};
