use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::system::OdeSystem;
use super::trajectory::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Time grid on `[t0, t1]`: each breakpoint-free segment is cut into equal
/// steps no longer than `dt`, so no step straddles a control switch.
pub fn step_grid(t0: f64, t1: f64, dt: f64, breakpoints: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("empty interval [{t0}, {t1}]")));
    }
    let tol = 1e-12 * (1.0 + t1.abs());
    let mut edges = vec![t0];
    edges.extend(breakpoints.iter().copied().filter(|&b| b > t0 + tol && b < t1 - tol));
    edges.push(t1);
    let mut times = vec![t0];
    for w in edges.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = len / n as f64;
        for k in 1..n {
            times.push(w[0] + k as f64 * h);
        }
        times.push(w[1]);
    }
    Ok(times)
}

/// Right-hand side `g(t)` in coefficient space.
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    /// Samples at given times, linearly interpolated to step midpoints.
    Sampled {
        times: Vec<f64>,
        values: Vec<DVector<Complex64>>,
    },
    /// One value per step, used as the midpoint value.
    PerStep(Vec<DVector<Complex64>>),
    /// Exact evaluation at step midpoints.
    Function(Arc<dyn Fn(f64) -> DVector<Complex64> + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Sampled { times, .. } => write!(f, "Sampled({} samples)", times.len()),
            Forcing::PerStep(v) => write!(f, "PerStep({} steps)", v.len()),
            Forcing::Function(_) => write!(f, "Function"),
        }
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// Value at time `t` (step midpoint for `PerStep`, which needs the step index).
    pub fn value(&self, step: usize, t: f64) -> Result<Option<DVector<Complex64>>> {
        Ok(match self {
            Forcing::Zero => None,
            Forcing::PerStep(v) => Some(
                v.get(step)
                    .ok_or_else(|| Error::TimeGridMismatch(format!("no forcing value for step {step}")))?
                    .clone(),
            ),
            Forcing::Function(f) => Some(f(t)),
            Forcing::Sampled { times, values } => {
                let n = times.len();
                let tol = 1e-12 * (1.0 + t.abs());
                if n == 0 || t < times[0] - tol || t > times[n - 1] + tol {
                    return Err(Error::TimeGridMismatch(format!("forcing not sampled at t = {t}")));
                }
                if n == 1 {
                    return Ok(Some(values[0].clone()));
                }
                let i = times.partition_point(|&s| s <= t).clamp(1, n - 1);
                let (a, b) = (times[i - 1], times[i]);
                let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
                Some(&values[i - 1] * Complex64::new(1.0 - s, 0.0) + &values[i] * Complex64::new(s, 0.0))
            }
        })
    }
}

type Key = (u64, u64, u64);

/// Crank-Nicolson stepper with cached step propagators.
///
/// A step of length `h` with controls `(u, w)` maps
/// `gamma -> P gamma + Q g` with `P = (I + i h/2 A)^-1 (I - i h/2 A)` and
/// `Q = -i h (I + i h/2 A)^-1`.
pub struct CrankNicolson<'a> {
    system: &'a OdeSystem,
    cache: HashMap<Key, (DMatrix<Complex64>, DMatrix<Complex64>)>,
}

impl<'a> CrankNicolson<'a> {
    pub fn new(system: &'a OdeSystem) -> Self {
        Self {
            system,
            cache: HashMap::new(),
        }
    }

    pub fn system(&self) -> &OdeSystem {
        self.system
    }

    fn propagator(&mut self, h: f64, u: f64, w: f64, step: usize, t: f64) -> Result<&(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let key = (step_key(h), u.to_bits(), w.to_bits());
        if !self.cache.contains_key(&key) {
            let m = self.system.order();
            let a = self.system.generator(u, w);
            let half = Complex64::new(0.0, 0.5 * h);
            let id = DMatrix::<Complex64>::identity(m, m);
            let lhs = &id + &a * half;
            let rhs = &id - &a * half;
            let inv = lhs.try_inverse().ok_or(Error::LinearSolve { step, t, dt: h })?;
            if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::LinearSolve { step, t, dt: h });
            }
            let p = &inv * rhs;
            let q = inv * Complex64::new(0.0, -h);
            self.cache.insert(key, (p, q));
        }
        Ok(&self.cache[&key])
    }

    /// Integrate over `times` (from [`step_grid`]) starting from `gamma0`.
    pub fn run(&mut self, gamma0: &DVector<Complex64>, forcing: &Forcing, times: &[f64]) -> Result<Vec<DVector<Complex64>>> {
        if gamma0.len() != self.system.order() {
            return Err(Error::InvalidInput("initial coefficients have the wrong order".into()));
        }
        if let Forcing::PerStep(v) = forcing {
            if v.len() != times.len() - 1 {
                return Err(Error::TimeGridMismatch(format!(
                    "{} forcing values for {} steps",
                    v.len(),
                    times.len() - 1
                )));
            }
        }
        let mut states = Vec::with_capacity(times.len());
        states.push(gamma0.clone());
        let mut gamma = gamma0.clone();
        for (n, w) in times.windows(2).enumerate() {
            let mid = 0.5 * (w[0] + w[1]);
            let (uc, wc) = self.system.controls(mid)?;
            let h = w[1] - w[0];
            let g = forcing.value(n, mid)?;
            let (p, q) = self.propagator(h, uc, wc, n, w[0])?;
            let mut next = p * &gamma;
            if let Some(g) = g {
                next += q * g;
            }
            gamma = next;
            states.push(gamma.clone());
        }
        Ok(states)
    }
}

/// Cache key for a step length: steps of one segment differ only by time-grid
/// round-off, so lengths agreeing to 12 significant digits share a propagator.
fn step_key(h: f64) -> u64 {
    let scale = 10f64.powi(h.abs().log10().floor() as i32 - 11);
    ((h / scale).round() * scale).to_bits()
}

/// Crank-Nicolson solution of `i gamma' = A(t) gamma + g(t)` on `interval`.
pub fn integrate_linear(
    system: &OdeSystem,
    gamma0: &DVector<Complex64>,
    forcing: &Forcing,
    interval: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    let times = step_grid(interval.0, interval.1, dt, system.breakpoints())?;
    let states = CrankNicolson::new(system).run(gamma0, forcing, &times)?;
    Trajectory::new(
        system.basis().clone(),
        times,
        states,
        TrajectoryMeta {
            integrator: "crank-nicolson".into(),
            dt,
            m: system.order(),
            config_hash: None,
        },
    )
}

/// Auxiliary linear problem with datum `G` and initial state `psi0`.
pub fn solve_auxiliary(
    system: &OdeSystem,
    forcing: &Forcing,
    psi0: &SpectralField,
    interval: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    if psi0.basis().domain() != system.basis().domain() || psi0.order() != system.order() {
        return Err(Error::DomainMismatch("initial state and system use different bases".into()));
    }
    integrate_linear(system, psi0.coeffs(), forcing, interval, dt)
}
