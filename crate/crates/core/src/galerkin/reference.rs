use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::integrate::step_grid;
use super::system::OdeSystem;
use super::trajectory::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::potentials::Nonlinearity;

const INNER_MAX_ITER: usize = 50;

/// Nonlinear reference run: Strang splitting of the exact Laplacian phase and
/// an implicit-midpoint step for `V + F`, with `refine` substeps per step of
/// the coarse grid built from `dt`. States are stored on the coarse grid.
pub struct ReferenceConfig<'a> {
    pub system: &'a OdeSystem,
    pub nonlinearity: &'a Nonlinearity,
    pub gamma0: DVector<Complex64>,
    pub interval: (f64, f64),
    pub dt: f64,
    pub refine: usize,
}

pub fn integrate_reference(cfg: &ReferenceConfig<'_>) -> Result<Trajectory> {
    let system = cfg.system;
    if cfg.refine == 0 {
        return Err(Error::InvalidInput("reference refinement must be at least 1".into()));
    }
    if cfg.gamma0.len() != system.order() {
        return Err(Error::InvalidInput("initial coefficients have the wrong order".into()));
    }
    let coarse = step_grid(cfg.interval.0, cfg.interval.1, cfg.dt, system.breakpoints())?;
    let lap = system.lap_diag();
    let mut potentials: HashMap<(u64, u64), DMatrix<Complex64>> = HashMap::new();
    let mut phases: HashMap<u64, DVector<Complex64>> = HashMap::new();
    let mut gamma = cfg.gamma0.clone();
    let mut states = Vec::with_capacity(coarse.len());
    states.push(gamma.clone());
    let mut step = 0usize;
    for w in coarse.windows(2) {
        let tau = (w[1] - w[0]) / cfg.refine as f64;
        for s in 0..cfg.refine {
            let t_mid = w[0] + (s as f64 + 0.5) * tau;
            let (u, wc) = system.controls(t_mid)?;
            let half = phases
                .entry(tau.to_bits())
                .or_insert_with(|| lap.map(|l| Complex64::from_polar(1.0, -0.5 * l * tau)))
                .clone();
            let pot = potentials
                .entry((u.to_bits(), wc.to_bits()))
                .or_insert_with(|| system.potential_matrix(u, wc));
            gamma.component_mul_assign(&half);
            gamma = midpoint_step(&gamma, pot, cfg.nonlinearity, tau, step, t_mid)?;
            gamma.component_mul_assign(&half);
            step += 1;
        }
        states.push(gamma.clone());
    }
    Trajectory::new(
        system.basis().clone(),
        coarse,
        states,
        TrajectoryMeta {
            integrator: format!("strang-reference(refine={})", cfg.refine),
            dt: cfg.dt / cfg.refine as f64,
            m: system.order(),
            config_hash: None,
        },
    )
}

/// `next = gamma - i tau [P mid + F(mid)]`, `mid = (gamma + next)/2`, solved by
/// fixed-point iteration.
fn midpoint_step(
    gamma: &DVector<Complex64>,
    pot: &DMatrix<Complex64>,
    nl: &Nonlinearity,
    tau: f64,
    step: usize,
    t: f64,
) -> Result<DVector<Complex64>> {
    let neg_i_tau = Complex64::new(0.0, -tau);
    let rhs = |mid: &DVector<Complex64>| -> Result<DVector<Complex64>> {
        let mut r = pot * mid;
        if !nl.is_zero() {
            r += nl.apply(mid)?;
        }
        Ok(r)
    };
    let mut next = gamma + rhs(gamma)? * neg_i_tau;
    let tol = 1e-14 * (1.0 + gamma.norm());
    let mut last_update = f64::INFINITY;
    for _ in 0..INNER_MAX_ITER {
        let mid = (gamma + &next) * Complex64::new(0.5, 0.0);
        let candidate = gamma + rhs(&mid)? * neg_i_tau;
        last_update = (&candidate - &next).norm();
        next = candidate;
        if last_update <= tol {
            return Ok(next);
        }
    }
    Err(Error::InnerFixedPoint {
        step,
        t,
        iterations: INNER_MAX_ITER,
        last_update,
    })
}
