use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solve::{solve_with, CheckSetup, SolveOptions, SolveReport, TdksProblem};
use crate::energy::{constants, LemmaConstants, RegularizationInput, RegularizedConstants, Variant};
use crate::error::{Error, Result};
use crate::galerkin::{OdeSystem, Trajectory};
use crate::potentials::{
    lipschitz_probe, mollifier_norms, FieldSampler, Hartree, Inequality, Mollifier, MollifierSpec, Nonlinearity,
    PotentialSpec, XcModel,
};
use crate::spectral::{norms_of, SpectralBasis, SpectralField};

/// Rough-data problem before mollification.
#[derive(Clone)]
pub struct RegularizedSetup<'a> {
    pub potentials: &'a PotentialSpec,
    pub basis: Arc<SpectralBasis>,
    pub hartree: Option<Hartree>,
    pub xc: XcModel,
    /// Rough exchange-correlation term, mollified after evaluation.
    pub rough_xc: XcModel,
    /// Initial state on the grid (need only be `H^1_0`).
    pub psi0_samples: &'a [Complex64],
    /// Seed and pair count for the potential-lemma probes.
    pub seed: u64,
    pub probe_trials: usize,
}

/// The smoothed problem for one `eps`.
pub struct Smoothed {
    pub mollifier: Mollifier,
    pub system: OdeSystem,
    pub nonlinearity: Nonlinearity,
    /// Projection of the unmollified initial state.
    pub raw_psi0: SpectralField,
    pub psi0: SpectralField,
}

pub fn smooth_problem(setup: &RegularizedSetup<'_>, eps: f64) -> Result<Smoothed> {
    let domain = setup.basis.domain();
    if setup.potentials.domain() != domain {
        return Err(Error::DomainMismatch("potentials sampled on another grid".into()));
    }
    if setup.psi0_samples.len() != domain.num_nodes() {
        return Err(Error::InvalidInput("initial samples do not match the grid".into()));
    }
    let mollifier = Mollifier::new(domain, MollifierSpec::new(eps)?)?;
    let system = OdeSystem::regularized(setup.basis.clone(), setup.potentials, &mollifier)?;
    let nonlinearity = Nonlinearity::new(setup.basis.clone(), setup.hartree.clone(), setup.xc.clone())?
        .with_rough_xc(setup.rough_xc.clone(), mollifier.clone())?;
    let raw_psi0 = SpectralField::project_samples(setup.basis.clone(), setup.psi0_samples)?;
    let psi0 = SpectralField::project_samples(setup.basis.clone(), &mollifier.apply(setup.psi0_samples))?;
    Ok(Smoothed {
        mollifier,
        system,
        nonlinearity,
        raw_psi0,
        psi0,
    })
}

/// Largest observed ratios for the three potential-lemma inequalities over
/// random fields and every pair of control levels.
pub fn probe_potential_constants(
    system: &OdeSystem,
    potentials: &PotentialSpec,
    reg: &RegularizationInput,
    sampler: &mut FieldSampler,
    trials: usize,
) -> (f64, f64, f64) {
    let n = potentials.norms();
    let (phi1, grad_phi) = mollifier_norms(&reg.spec, potentials.domain().dim());
    let f3 = n.v_inf + phi1 * (n.w_inf + reg.k1);
    let f4 = n.v_1inf + phi1 * (n.w_1inf + reg.k2);
    let f5 = n.v_2inf + grad_phi * (n.w_1inf + reg.k2);
    let mut out = (0.0f64, 0.0f64, 0.0f64);
    let basis = system.basis();
    let us = potentials.u().values().to_vec();
    let ws = potentials.w().values().to_vec();
    for &u in &us {
        for &w in &ws {
            let mat = system.potential_matrix(u, w);
            for _ in 0..trials {
                let phi = sampler.sample();
                let (p, q) = (norms_of(basis, &phi), norms_of(basis, &(&mat * &phi)));
                if f3 > 0.0 && p.l2 > 0.0 {
                    out.0 = out.0.max(q.l2 / (f3 * p.l2));
                }
                if f4 > 0.0 && p.h1 > 0.0 {
                    out.1 = out.1.max(q.grad / (f4 * p.h1));
                }
                if f5 > 0.0 && p.h2 > 0.0 {
                    out.2 = out.2.max(q.lap / (f5 * p.h2));
                }
            }
        }
    }
    out
}

/// Bounds that should not depend on `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBounds {
    /// `max_t ||psi_eps(t)||`
    pub c_alpha: f64,
    /// `max_t ||grad psi_eps(t)||`
    pub c_beta: f64,
    /// `max_t ||d/dt psi_eps(t)||_{H^-1}` by difference quotients
    pub c_gamma: f64,
    /// `max_t ||Delta psi_eps(t)||`, expected to grow as `eps` shrinks
    pub lap_max: f64,
}

pub fn uniform_bounds(traj: &Trajectory) -> UniformBounds {
    let norms = traj.norms();
    let (t, s) = (traj.times(), traj.states());
    let mut c_gamma = 0.0f64;
    for i in 0..t.len().saturating_sub(1) {
        let q = (&s[i + 1] - &s[i]) / Complex64::new(t[i + 1] - t[i], 0.0);
        c_gamma = c_gamma.max(norms_of(traj.basis(), &q).h_minus1);
    }
    UniformBounds {
        c_alpha: norms.iter().map(|n| n.l2).fold(0.0, f64::max),
        c_beta: norms.iter().map(|n| n.grad).fold(0.0, f64::max),
        c_gamma,
        lap_max: norms.iter().map(|n| n.lap).fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularizedReport {
    pub epsilon: f64,
    pub regularized: RegularizedConstants,
    pub bounds: UniformBounds,
    /// `||psi_{0,eps} - psi_0||` on the grid.
    pub initial_error: f64,
    pub solve: SolveReport,
}

/// Mollifier data for the regularized checks: `K1` declared by the rough
/// model, `K2` declared or probed, `C3..C5` probed over the control levels and
/// `C0..C2` fitted to the initial state.
pub fn regularization_input(setup: &RegularizedSetup<'_>, sm: &Smoothed) -> Result<RegularizationInput> {
    let mut reg = RegularizationInput {
        spec: sm.mollifier.spec(),
        k1: setup.rough_xc.constants.k1.unwrap_or(0.0),
        k2: 0.0,
        lemma: LemmaConstants::default(),
    };
    reg.k2 = match (setup.rough_xc.is_none(), setup.rough_xc.constants.k2) {
        (true, _) => 0.0,
        (false, Some(k2)) => k2,
        (false, None) => {
            let mut s = FieldSampler::new(setup.basis.clone(), setup.seed ^ 0x4b32, 1.0, 1.0);
            lipschitz_probe(
                Inequality::RoughXcH1,
                &sm.nonlinearity,
                &mut s,
                setup.probe_trials.max(1),
                None,
                0.0,
            )?
            .max
        }
    };
    let mut sampler = FieldSampler::new(setup.basis.clone(), setup.seed, 1.0, 0.5);
    let (c3, c4, c5) = probe_potential_constants(&sm.system, setup.potentials, &reg, &mut sampler, setup.probe_trials);
    reg.lemma.c3 = c3.max(1.0);
    reg.lemma.c4 = c4.max(1.0);
    reg.lemma.c5 = c5.max(1.0);
    let (phi1, grad_phi) = mollifier_norms(&reg.spec, setup.basis.domain().dim());
    super::solve::fit_initial_constants(&mut reg, &sm.raw_psi0, &sm.psi0, phi1, grad_phi);
    Ok(reg)
}

/// Mollify the initial state and rough potentials at radius `eps`, then run
/// the nonlinear solve with the regularized estimate checks.
pub fn solve_regularized(setup: &RegularizedSetup<'_>, eps: f64, opts: &SolveOptions) -> Result<RegularizedReport> {
    let sm = smooth_problem(setup, eps)?;
    let reg = regularization_input(setup, &sm)?;

    let problem = TdksProblem {
        potentials: setup.potentials,
        system: &sm.system,
        nonlinearity: &sm.nonlinearity,
        psi0: sm.psi0.clone(),
    };
    let checks = CheckSetup {
        variant: Variant::Epsilon,
        regularization: Some(reg),
        raw_psi0: Some(sm.raw_psi0.clone()),
    };
    let solve = solve_with(&problem, opts, checks)?;
    let regularized = constants(setup.potentials, setup.potentials.horizon(), setup.basis.domain(), Some(&reg))?
        .regularized
        .expect("mollifier data supplied");
    let bounds = uniform_bounds(solve.trajectory());
    let h = setup.basis.domain().cell_volume();
    let smoothed = sm.mollifier.apply(setup.psi0_samples);
    let initial_error = (smoothed
        .iter()
        .zip(setup.psi0_samples)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        * h)
        .sqrt();
    Ok(RegularizedReport {
        epsilon: eps,
        regularized,
        bounds,
        initial_error,
        solve,
    })
}

fn interpolate(traj: &Trajectory, t: f64) -> DVector<Complex64> {
    let times = traj.times();
    let s = traj.states();
    let i = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    &s[i - 1] * Complex64::new(1.0 - w, 0.0) + &s[i] * Complex64::new(w, 0.0)
}

/// `||a - b||` in `L^2(0, T; L^2)`: trapezoid rule over the union of both
/// time grids, each path interpolated linearly in time.
pub fn y_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let tol = 1e-9 * a.end().abs().max(1.0);
    if (a.start() - b.start()).abs() > tol || (a.end() - b.end()).abs() > tol || a.len() < 2 || b.len() < 2 {
        return Err(Error::TimeGridMismatch("paths cover different intervals".into()));
    }
    let mut grid: Vec<f64> = a.times().iter().chain(b.times()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() <= tol);
    let sq: Vec<f64> = grid
        .iter()
        .map(|&t| (interpolate(a, t) - interpolate(b, t)).norm_squared())
        .collect();
    let total: f64 = grid
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    Ok(total.sqrt())
}
