use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::commands::{nonlinear_constants, regularized_setup, solve_built, write_schedule_csv, Failure, Outcome};
use super::config::{build, Built, RunConfig};
use crate::error::{Error, Result};
use crate::fixedpoint::{
    smooth_problem, solve_regularized, uniform_bounds, y_distance, FixedPointProblem, Mode, SolveReport,
};
use crate::galerkin::Trajectory;
use crate::potentials::{lipschitz_probe, quotient, FieldSampler, Inequality, LipschitzReport, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Modes,
    Timestep,
    Epsilon,
    Lipschitz,
    Schedule,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Modes => "modes",
            StudyKind::Timestep => "timestep",
            StudyKind::Epsilon => "epsilon",
            StudyKind::Lipschitz => "lipschitz",
            StudyKind::Schedule => "schedule",
        }
    }
}

/// Picard solve on each `[breaks[i], breaks[i+1]]`, handing the endpoint on.
pub fn march(fp: &FixedPointProblem<'_>, psi0: &DVector<Complex64>, breaks: &[f64], tol: f64, max_iter: usize) -> Result<Trajectory> {
    let mut state = psi0.clone();
    let mut out: Option<Trajectory> = None;
    for w in breaks.windows(2) {
        let (piece, _) = fp.picard(&state, (w[0], w[1]), tol, max_iter)?;
        state = piece.last().clone();
        match &mut out {
            Some(t) => t.extend(&piece)?,
            None => out = Some(piece),
        }
    }
    out.ok_or_else(|| Error::InvalidInput("march needs at least one interval".into()))
}

fn smooth_system(built: &Built) -> Result<&crate::galerkin::OdeSystem> {
    built
        .system
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("this study needs smooth potentials (no [regularization])".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesRow {
    pub m: usize,
    /// `||psi_m(T) - psi_ref(T)||` with the coarse state zero-padded.
    pub error: f64,
    /// Error of the previous rung over this one.
    pub ratio: Option<f64>,
}

/// m-ladder against a run with twice the largest ladder order, all on the
/// subinterval boundaries of the reference run.
pub fn modes_study(cfg: &RunConfig) -> Result<(usize, Vec<ModesRow>)> {
    let m_ref = 2 * cfg.study.m_ladder.iter().copied().max().unwrap_or(1);
    let ref_cfg = cfg.with_modes(m_ref);
    let built = build(&ref_cfg)?;
    smooth_system(&built)?;
    let reference = solve_built(&ref_cfg, &built).map_err(|f| f.error)?;
    let report = reference.report();
    let mut breaks = vec![0.0];
    breaks.extend(report.subintervals.iter().map(|s| s.end));
    let target = report.trajectory().last().clone();
    let mut rows: Vec<ModesRow> = Vec::new();
    for &m in &cfg.study.m_ladder {
        let b = build(&cfg.with_modes(m))?;
        let fp = FixedPointProblem {
            system: smooth_system(&b)?,
            nonlinearity: &b.nonlinearity,
            dt: cfg.discretization.dt,
        };
        let traj = march(&fp, b.psi0.coeffs(), &breaks, cfg.fixedpoint.tol, cfg.fixedpoint.max_iter)?;
        let end = traj.last();
        let error = target
            .iter()
            .enumerate()
            .map(|(j, r)| (if j < m { r - end[j] } else { *r }).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let ratio = rows.last().map(|p| p.error / error);
        rows.push(ModesRow { m, error, ratio });
    }
    Ok((m_ref, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepRow {
    pub dt: f64,
    pub error: f64,
    /// Observed order between this step and the previous one.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepStudy {
    /// Breakpoint-free interval `[0, t_end]` of the study.
    pub t_end: f64,
    pub pieces: usize,
    pub reference_dt: f64,
    pub rows: Vec<TimestepRow>,
    /// Least-squares slope of `log error` against `log dt`.
    pub slope: f64,
}

pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// dt-ladder on the first breakpoint-free interval against a run with the
/// smallest step divided by `reference_refine`.
pub fn timestep_study(cfg: &RunConfig) -> Result<TimestepStudy> {
    let built = build(cfg)?;
    let system = smooth_system(&built)?;
    let t_end = system
        .breakpoints()
        .iter()
        .copied()
        .find(|&b| b > 1e-12)
        .unwrap_or(cfg.time.horizon)
        .min(cfg.time.horizon);
    let dt = cfg.discretization.dt;
    let ladder = cfg
        .study
        .dt_ladder
        .clone()
        .unwrap_or_else(|| vec![8.0 * dt, 4.0 * dt, 2.0 * dt, dt]);
    let smallest = ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let reference_dt = smallest / cfg.study.reference_refine as f64;
    let (tol, max_iter) = (cfg.fixedpoint.tol, cfg.fixedpoint.max_iter);
    let fp_at = |dt: f64| FixedPointProblem {
        system,
        nonlinearity: &built.nonlinearity,
        dt,
    };
    let mut pieces = 1;
    let (breaks, reference) = loop {
        let breaks: Vec<f64> = (0..=pieces).map(|i| t_end * i as f64 / pieces as f64).collect();
        match march(&fp_at(reference_dt), built.psi0.coeffs(), &breaks, tol, max_iter) {
            Ok(t) => break (breaks, t),
            Err(Error::PicardNonConvergence { .. }) if pieces < 1024 => pieces *= 2,
            Err(e) => return Err(e),
        }
    };
    let target = reference.last();
    let mut rows: Vec<TimestepRow> = Vec::new();
    for &h in &ladder {
        let traj = march(&fp_at(h), built.psi0.coeffs(), &breaks, tol, max_iter)?;
        let error = (traj.last() - target).norm();
        let order = rows.last().map(|p| (p.error / error).ln() / (p.dt / h).ln());
        rows.push(TimestepRow { dt: h, error, order });
    }
    let slope = fitted_slope(
        &rows.iter().map(|r| r.dt).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    );
    Ok(TimestepStudy {
        t_end,
        pieces,
        reference_dt,
        rows,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
    pub c_gamma: f64,
    pub lap_max: f64,
    pub c_hat: f64,
    pub c_hat_grad: f64,
    pub c_eps: f64,
    pub grad_phi_l1: f64,
    pub lemma_c0: f64,
    pub lemma_c2: f64,
    pub initial_error: f64,
    /// `||psi_eps - psi_{previous eps}||` in `L^2(0, T; L^2)`.
    pub cauchy_y: Option<f64>,
    pub estimates_passed: bool,
}

/// Regularized solves over the configured epsilon ladder.
pub fn epsilon_study(cfg: &RunConfig) -> Result<(Vec<EpsilonRow>, Vec<Trajectory>)> {
    let built = build(cfg)?;
    let setup = regularized_setup(cfg, &built);
    let opts = cfg.options(nonlinear_constants(cfg, &built)?);
    let mut rows: Vec<EpsilonRow> = Vec::new();
    let mut trajs: Vec<Trajectory> = Vec::new();
    for &eps in &cfg.study.eps_ladder {
        let rep = solve_regularized(&setup, eps, &opts)?;
        let traj = rep.solve.trajectory().clone();
        let cauchy_y = trajs.last().map(|p| y_distance(p, &traj)).transpose()?;
        let b = uniform_bounds(&traj);
        rows.push(EpsilonRow {
            epsilon: eps,
            c_alpha: b.c_alpha,
            c_beta: b.c_beta,
            c_gamma: b.c_gamma,
            lap_max: b.lap_max,
            c_hat: rep.regularized.c_hat,
            c_hat_grad: rep.regularized.c_hat_grad,
            c_eps: rep.regularized.c_eps,
            grad_phi_l1: rep.regularized.grad_phi_l1,
            lemma_c0: rep.regularized.lemma.c0,
            lemma_c2: rep.regularized.lemma.c2,
            initial_error: rep.initial_error,
            cauchy_y,
            estimates_passed: rep.solve.estimates_passed(),
        });
        trajs.push(traj);
    }
    Ok((rows, trajs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub constant: String,
    pub report: LipschitzReport,
    /// Largest relative change of the quotient under a common phase rotation.
    pub phase_variation: f64,
}

fn phase_variation(ineq: Inequality, nl: &Nonlinearity, sampler: &mut FieldSampler, pairs: usize) -> Result<f64> {
    let rot = Complex64::from_polar(1.0, 0.7);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (a, b) = sampler.sample_pair();
        if let (Some(q0), Some(q1)) = (quotient(ineq, nl, &a, &b)?, quotient(ineq, nl, &(&a * rot), &(&b * rot))?) {
            if q0 > 0.0 {
                worst = worst.max((q0 - q1).abs() / q0);
            }
        }
    }
    Ok(worst)
}

/// Lipschitz probes for every inequality the configured nonlinearity has.
pub fn lipschitz_study(cfg: &RunConfig) -> Result<Vec<LipschitzRow>> {
    let built = build(cfg)?;
    let smoothed;
    let nl = match &cfg.regularization {
        Some(r) => {
            smoothed = smooth_problem(&regularized_setup(cfg, &built), r.epsilon)?;
            &smoothed.nonlinearity
        }
        None => &built.nonlinearity,
    };
    let xc = &cfg.nonlinear.xc;
    let rough = &cfg.nonlinear.rough_xc;
    let mut list: Vec<(Inequality, Option<f64>)> = Vec::new();
    if built.hartree.is_some() {
        for i in [
            Inequality::HartreeL2,
            Inequality::HartreeH2Growth,
            Inequality::HartreeH2,
            Inequality::HartreeGradient,
        ] {
            list.push((i, None));
        }
    }
    if !xc.is_none() {
        list.push((Inequality::XcL2, xc.constants.k));
        list.push((Inequality::XcH2, xc.constants.k_tilde));
    }
    if !rough.is_none() && cfg.regularization.is_some() {
        list.push((Inequality::RoughXcL2, rough.constants.k1));
        list.push((Inequality::RoughXcH1, rough.constants.k2));
    }
    let mut rows = Vec::new();
    for (i, (ineq, declared)) in list.into_iter().enumerate() {
        let seed = cfg.run.seed.wrapping_add(1 + i as u64);
        let mut sampler = FieldSampler::new(built.basis.clone(), seed, cfg.fixedpoint.probe_radius, 1.0);
        let report = lipschitz_probe(ineq, nl, &mut sampler, cfg.study.lipschitz_trials, declared, 1e-9)?;
        let phase = phase_variation(ineq, nl, &mut sampler, 20)?;
        rows.push(LipschitzRow {
            constant: ineq.constant_name().into(),
            report,
            phase_variation: phase,
        });
    }
    Ok(rows)
}

/// Certified solve, regardless of the configured mode.
pub fn schedule_study(cfg: &RunConfig) -> Outcome<SolveReport> {
    let mut c = cfg.clone();
    c.fixedpoint.mode = Mode::Certified;
    let built = build(&c).map_err(Failure::config)?;
    solve_built(&c, &built).map(|run| match run {
        super::commands::SolveRun::Plain(r) => r,
        super::commands::SolveRun::Regularized(r) => r.solve,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Run one study and write `study_<kind>.csv` into `out`.
pub fn run_study(kind: StudyKind, cfg: &RunConfig, out: &Path) -> Outcome<()> {
    let solver = Failure::solver;
    fs::create_dir_all(out).map_err(|e| solver(e.into()))?;
    let path = out.join(format!("study_{}.csv", kind.name()));
    let mut f = BufWriter::new(fs::File::create(&path).map_err(|e| solver(e.into()))?);
    let write = |f: &mut BufWriter<fs::File>, s: String| -> Outcome<()> { writeln!(f, "{s}").map_err(|e| solver(e.into())) };
    match kind {
        StudyKind::Modes => {
            let (m_ref, rows) = modes_study(cfg).map_err(solver)?;
            write(&mut f, format!("m,error,ratio,m_ref"))?;
            for r in rows {
                write(&mut f, format!("{},{},{},{m_ref}", r.m, r.error, opt(r.ratio)))?;
            }
        }
        StudyKind::Timestep => {
            let s = timestep_study(cfg).map_err(solver)?;
            write(&mut f, "dt,error,order,slope,t_end,reference_dt".into())?;
            for r in &s.rows {
                write(
                    &mut f,
                    format!("{},{},{},{},{},{}", r.dt, r.error, opt(r.order), s.slope, s.t_end, s.reference_dt),
                )?;
            }
        }
        StudyKind::Epsilon => {
            let (rows, _) = epsilon_study(cfg).map_err(solver)?;
            write(
                &mut f,
                "epsilon,c_alpha,c_beta,c_gamma,lap_max,c_hat,c_hat_grad,c_eps,grad_phi_l1,lemma_c0,lemma_c2,initial_error,cauchy_y,estimates_passed".into(),
            )?;
            for r in rows {
                write(
                    &mut f,
                    format!(
                        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.epsilon,
                        r.c_alpha,
                        r.c_beta,
                        r.c_gamma,
                        r.lap_max,
                        r.c_hat,
                        r.c_hat_grad,
                        r.c_eps,
                        r.grad_phi_l1,
                        r.lemma_c0,
                        r.lemma_c2,
                        r.initial_error,
                        opt(r.cauchy_y),
                        r.estimates_passed
                    ),
                )?;
            }
        }
        StudyKind::Lipschitz => {
            let rows = lipschitz_study(cfg).map_err(solver)?;
            write(&mut f, "constant,trials,skipped,max,mean,declared,pass,stabilized,phase_variation".into())?;
            for r in rows {
                let p = &r.report;
                write(
                    &mut f,
                    format!(
                        "{},{},{},{},{},{},{},{},{}",
                        r.constant,
                        p.trials,
                        p.skipped,
                        p.max,
                        p.mean,
                        opt(p.declared),
                        p.pass.map_or(String::new(), |b| b.to_string()),
                        p.stabilized,
                        r.phase_variation
                    ),
                )?;
            }
        }
        StudyKind::Schedule => {
            let report = schedule_study(cfg)?;
            write_schedule_csv(&mut f, &report).map_err(solver)?;
        }
    }
    f.flush().map_err(|e| solver(e.into()))
}
