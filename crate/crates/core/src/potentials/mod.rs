//! Potential terms: the controlled linear potentials `V` and `W`, the Hartree
//! and exchange-correlation nonlinearity, mollification, and empirical
//! Lipschitz probes for the nonlinear terms.

mod control;
mod convolution;
mod hartree;
mod lipschitz;
mod mollifier;
mod nonlinear;
mod profile;
pub(crate) mod quadrature;
mod sampler;
mod spec;
mod xc;

pub use control::ControlSignal;
pub use hartree::{coulomb_cell_average, hartree, Hartree, HartreeKernel};
pub use lipschitz::{lipschitz_probe, quotient, Inequality, LipschitzReport};
pub use mollifier::{bump_mass, mollifier_norms, mollify, Mollifier, MollifierSpec};
pub use nonlinear::{nonlinear_F, Nonlinearity};
pub use profile::RealProfile;
pub use sampler::FieldSampler;
pub use spec::{eval_v, eval_w, PotentialNorms, PotentialSpec};
pub use xc::{XcConstants, XcKind, XcModel};
