use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{step_grid, CrankNicolson, Forcing, OdeSystem, Trajectory, TrajectoryMeta};
use crate::potentials::Nonlinearity;

/// Linear system, nonlinearity and time step of the fixed-point map.
pub struct FixedPointProblem<'a> {
    pub system: &'a OdeSystem,
    pub nonlinearity: &'a Nonlinearity,
    pub dt: f64,
}

/// Per-iteration record of a Picard solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardLog {
    /// `sup_t ||L_n - L_{n-1}||_H2` for `n = 1, 2, ...`
    pub differences: Vec<f64>,
    /// Successive difference ratios.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

impl PicardLog {
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// `sup_t ||a(t) - b(t)||_H2` over the stored samples.
pub fn y_hat_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    a.sup_distance(b, |n| n.h2)
}

fn midpoint(a: &DVector<Complex64>, b: &DVector<Complex64>) -> DVector<Complex64> {
    (a + b) * Complex64::new(0.5, 0.0)
}

impl FixedPointProblem<'_> {
    pub fn time_grid(&self, interval: (f64, f64)) -> Result<Vec<f64>> {
        step_grid(interval.0, interval.1, self.dt, self.system.breakpoints())
    }

    /// `F` at the step midpoints of `lam`.
    pub fn midpoint_forcing(&self, lam: &Trajectory) -> Result<Vec<DVector<Complex64>>> {
        let s = lam.states();
        (0..s.len() - 1)
            .into_par_iter()
            .map(|n| self.nonlinearity.apply(&midpoint(&s[n], &s[n + 1])))
            .collect()
    }

    /// `F(lam)` sampled at the nodes and step midpoints, for the estimate checks.
    pub fn datum(&self, lam: &Trajectory) -> Result<Trajectory> {
        let (t, s) = (lam.times(), lam.states());
        let mut times = Vec::with_capacity(2 * t.len() - 1);
        let mut points = Vec::with_capacity(2 * t.len() - 1);
        for i in 0..t.len() {
            if i > 0 {
                times.push(0.5 * (t[i - 1] + t[i]));
                points.push(midpoint(&s[i - 1], &s[i]));
            }
            times.push(t[i]);
            points.push(s[i].clone());
        }
        let values: Vec<DVector<Complex64>> = points
            .par_iter()
            .map(|p| self.nonlinearity.apply(p))
            .collect::<Result<_>>()?;
        Trajectory::new(
            lam.basis().clone(),
            times,
            values,
            TrajectoryMeta {
                integrator: "nonlinear-datum".into(),
                dt: self.dt,
                m: lam.basis().len(),
                config_hash: None,
            },
        )
    }

    /// `A(lam)`: the auxiliary solution started at `psi0` with datum `F(lam)`
    /// taken at the step midpoints of the grid of `lam`.
    pub fn apply(&self, lam: &Trajectory, psi0: &DVector<Complex64>) -> Result<Trajectory> {
        let forcing = if self.nonlinearity.is_zero() {
            Forcing::Zero
        } else {
            Forcing::PerStep(self.midpoint_forcing(lam)?)
        };
        self.run_linear(lam.times(), psi0, &forcing)
    }

    fn run_linear(&self, times: &[f64], psi0: &DVector<Complex64>, forcing: &Forcing) -> Result<Trajectory> {
        if times.len() < 2 {
            return Err(Error::InvalidInput("fixed-point map needs at least one step".into()));
        }
        let states = CrankNicolson::new(self.system).run(psi0, forcing, times)?;
        Trajectory::new(
            self.system.basis().clone(),
            times.to_vec(),
            states,
            TrajectoryMeta {
                integrator: "crank-nicolson/picard".into(),
                dt: self.dt,
                m: self.system.order(),
                config_hash: None,
            },
        )
    }

    /// Iterate `L_{n+1} = A(L_n)` from the constant path `psi0` until the
    /// sup-in-time `H^2` update falls below `tol`.
    pub fn picard(
        &self,
        psi0: &DVector<Complex64>,
        interval: (f64, f64),
        tol: f64,
        max_iter: usize,
    ) -> Result<(Trajectory, PicardLog)> {
        let times = self.time_grid(interval)?;
        let start = Trajectory::constant(self.system.basis().clone(), times, psi0)?;
        self.picard_from(start, psi0, tol, max_iter)
    }

    /// Picard iteration from an arbitrary starting path.
    pub fn picard_from(
        &self,
        start: Trajectory,
        psi0: &DVector<Complex64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Trajectory, PicardLog)> {
        if !(tol > 0.0) || max_iter == 0 {
            return Err(Error::InvalidInput("Picard needs a positive tolerance and iteration budget".into()));
        }
        let mut lam = start;
        let mut log = PicardLog {
            differences: Vec::new(),
            ratios: Vec::new(),
            converged: false,
        };
        for _ in 0..max_iter {
            let next = self.apply(&lam, psi0)?;
            let d = y_hat_distance(&next, &lam)?;
            if let Some(&prev) = log.differences.last() {
                if prev > 0.0 {
                    log.ratios.push(d / prev);
                }
            }
            log.differences.push(d);
            lam = next;
            if !d.is_finite() {
                break;
            }
            if d < tol {
                log.converged = true;
                return Ok((lam, log));
            }
        }
        Err(Error::PicardNonConvergence {
            tol,
            iterations: log.differences.len(),
            ratios: log.ratios,
        })
    }
}

/// Free-function form of the fixed-point map.
#[allow(non_snake_case)]
pub fn apply_A(problem: &FixedPointProblem<'_>, lam: &Trajectory, psi0: &DVector<Complex64>) -> Result<Trajectory> {
    problem.apply(lam, psi0)
}

/// Free-function form of the Picard solve on `interval`.
pub fn picard_solve(
    problem: &FixedPointProblem<'_>,
    psi0: &DVector<Complex64>,
    interval: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<(Trajectory, PicardLog)> {
    problem.picard(psi0, interval, tol, max_iter)
}
