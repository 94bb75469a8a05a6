//! Dirichlet-Laplacian eigenbasis of a box, spectral fields and their norms.

mod basis;
mod domain;
mod field;
pub mod io;

pub use basis::SpectralBasis;
pub use domain::{BoxDomain, Eigenfunction, ModeIndex};
pub use field::{norms_of, truncation_check, NormReport, SpectralField, TruncationReport};
