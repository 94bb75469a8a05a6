//! Spectral-Galerkin solver for the time-dependent Kohn-Sham equation
//! `i d/dt psi = -Delta psi + V psi + F(psi)` on a box with homogeneous
//! Dirichlet data, together with the explicit energy-estimate constants,
//! a certified contraction time stepper and a mollifier path for rough data.

pub mod cli;
pub mod energy;
pub mod error;
pub mod fixedpoint;
pub mod galerkin;
pub mod potentials;
pub mod spectral;

pub use error::{Error, Result};
