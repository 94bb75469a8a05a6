use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ball::{ContractionInputs, NonlinearConstants};
use super::operator::{FixedPointProblem, PicardLog};
use super::schedule::{covering_schedule, plan_step, BallPolicy, ScheduleState};
use crate::energy::{
    check_estimates, constants, constants_from_norms, EstimateConstants, EstimateReport, RegularizationInput, Variant,
};
use crate::error::{Error, Result};
use crate::galerkin::{OdeSystem, Trajectory};
use crate::potentials::{PotentialNorms, PotentialSpec};
use crate::spectral::{norms_of, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Subinterval lengths from the covering rule with `g_k < 1`.
    Certified,
    /// Largest dyadic subinterval whose observed Picard ratio stays below 0.5.
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub mode: Mode,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub policy: BallPolicy,
    pub nonlinear: NonlinearConstants,
    /// Observed-ratio threshold of the practical mode.
    pub practical_ratio: f64,
    pub check_estimates: bool,
}

impl SolveOptions {
    pub fn new(mode: Mode, dt: f64, nonlinear: NonlinearConstants) -> Self {
        Self {
            mode,
            dt,
            tol: 1e-10,
            max_iter: 60,
            policy: BallPolicy::default(),
            nonlinear,
            practical_ratio: 0.5,
            check_estimates: true,
        }
    }
}

/// Everything that defines one nonlinear solve.
pub struct TdksProblem<'a> {
    pub potentials: &'a PotentialSpec,
    pub system: &'a OdeSystem,
    pub nonlinearity: &'a crate::potentials::Nonlinearity,
    pub psi0: SpectralField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubintervalReport {
    pub k: usize,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    pub iterations: usize,
    pub differences: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Certified contraction factor for this length and starting state.
    pub g: f64,
    pub certified: bool,
    pub estimates_passed: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub horizon: f64,
    pub subintervals: Vec<SubintervalReport>,
    /// Emitted schedule in certified mode; in practical mode the certified
    /// plan evaluated at each practical starting point.
    pub schedule: Vec<ScheduleState>,
    pub nonlinear: NonlinearConstants,
    pub constants: EstimateConstants,
    pub estimates: Vec<EstimateReport>,
    /// `max_t | ||psi(t)|| - ||psi0|| |`
    pub norm_drift: f64,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl SolveReport {
    pub fn trajectory(&self) -> &Trajectory {
        self.trajectory.as_ref().expect("report carries its trajectory")
    }

    pub fn estimates_passed(&self) -> bool {
        self.estimates.iter().all(|r| r.passed())
    }

    pub fn endpoint(&self) -> &DVector<Complex64> {
        self.trajectory().last()
    }

    pub fn certified(&self) -> bool {
        self.subintervals.iter().all(|s| s.certified)
    }
}

/// How the estimate checks are set up for one subinterval.
pub(crate) struct CheckSetup {
    pub variant: Variant,
    pub regularization: Option<RegularizationInput>,
    /// Unregularized initial state, used on the first subinterval.
    pub raw_psi0: Option<SpectralField>,
}

impl CheckSetup {
    fn plain() -> Self {
        Self {
            variant: Variant::Plain,
            regularization: None,
            raw_psi0: None,
        }
    }
}

/// Potential norms used for the schedule constants. A rough part enters
/// through the bounds of its mollified version.
pub(crate) fn schedule_norms(potentials: &PotentialSpec, reg: Option<&RegularizationInput>) -> PotentialNorms {
    let mut n = *potentials.norms();
    if let (true, Some(r)) = (potentials.has_rough_part(), reg) {
        let (phi1, grad_phi) = crate::potentials::mollifier_norms(&r.spec, potentials.domain().dim());
        n.v_inf += phi1 * n.w_inf;
        n.grad_v_inf += phi1 * n.w_1inf;
        n.lap_v_inf += grad_phi * n.w_1inf;
        n.v_1inf = n.v_inf + n.grad_v_inf;
        n.v_2inf += phi1 * n.w_1inf + grad_phi * n.w_1inf;
    }
    n
}

fn drift(traj: &Trajectory, psi0: &DVector<Complex64>) -> f64 {
    let n0 = psi0.norm();
    traj.states().iter().map(|s| (s.norm() - n0).abs()).fold(0.0, f64::max)
}

struct Runner<'a, 'b> {
    problem: &'a TdksProblem<'b>,
    opts: &'a SolveOptions,
    fp: FixedPointProblem<'a>,
    checks: CheckSetup,
    sched_norms: PotentialNorms,
    horizon: f64,
    subintervals: Vec<SubintervalReport>,
    estimates: Vec<EstimateReport>,
    trajectory: Option<Trajectory>,
    state: DVector<Complex64>,
}

impl Runner<'_, '_> {
    fn inputs_for(&self, len: f64) -> Result<ContractionInputs> {
        let c = constants_from_norms(&self.sched_norms, len, self.problem.potentials.domain(), None)?;
        Ok(ContractionInputs::new(&c, &self.opts.nonlinear))
    }

    fn check(&mut self, traj: &Trajectory, start_state: &DVector<Complex64>, first: bool) -> Result<Option<bool>> {
        if !self.opts.check_estimates {
            return Ok(None);
        }
        let len = traj.end() - traj.start();
        let domain = self.problem.potentials.domain();
        let datum = if self.problem.nonlinearity.is_zero() {
            None
        } else {
            Some(self.fp.datum(traj)?)
        };
        let start_field = SpectralField::new(traj.basis().clone(), start_state.clone())?;
        let report = match self.checks.variant {
            Variant::Plain => {
                let consts = constants(self.problem.potentials, len, domain, None)?;
                check_estimates(traj, datum.as_ref(), &start_field, &consts, Variant::Plain)?
            }
            Variant::Epsilon => {
                let mut reg = self
                    .checks
                    .regularization
                    .ok_or_else(|| Error::InvalidConfig("regularized checks need mollifier data".into()))?;
                let reference = match (&self.checks.raw_psi0, first) {
                    (Some(raw), true) => raw.clone(),
                    _ => start_field.clone(),
                };
                let (phi1, grad_phi) = crate::potentials::mollifier_norms(&reg.spec, domain.dim());
                fit_initial_constants(&mut reg, &reference, &start_field, phi1, grad_phi);
                let consts = constants(self.problem.potentials, len, domain, Some(&reg))?;
                check_estimates(traj, datum.as_ref(), &reference, &consts, Variant::Epsilon)?
            }
        };
        let passed = report.passed();
        self.estimates.push(report);
        Ok(Some(passed))
    }

    fn accept(
        &mut self,
        k: usize,
        traj: Trajectory,
        log: &PicardLog,
        g: f64,
        certified: bool,
        start_state: DVector<Complex64>,
    ) -> Result<f64> {
        let first = self.trajectory.is_none();
        let estimates_passed = self.check(&traj, &start_state, first)?;
        self.subintervals.push(SubintervalReport {
            k,
            start: traj.start(),
            end: traj.end(),
            steps: traj.len() - 1,
            iterations: log.iterations(),
            differences: log.differences.clone(),
            ratios: log.ratios.clone(),
            max_ratio: log.max_ratio(),
            g,
            certified,
            estimates_passed,
        });
        self.state = traj.last().clone();
        let a_k = norms_of(traj.basis(), &self.state).lap.powi(2);
        match &mut self.trajectory {
            Some(all) => all.extend(&traj)?,
            None => self.trajectory = Some(traj),
        }
        Ok(a_k)
    }

    fn run_certified(&mut self) -> Result<Vec<ScheduleState>> {
        let a0 = norms_of(self.problem.system.basis(), &self.state).lap.powi(2);
        let horizon = self.horizon;
        let policy = self.opts.policy;
        let (tol, max_iter) = (self.opts.tol, self.opts.max_iter);
        let inputs = |len: f64| self.inputs_for(len);
        // the schedule planner borrows the runner immutably; solves are collected and applied after each plan
        let mut pending: Vec<(ScheduleState, Trajectory, PicardLog, DVector<Complex64>)> = Vec::new();
        let mut state = self.state.clone();
        let schedule = covering_schedule(horizon, a0, &inputs, &policy, |plan| {
            let (traj, log) = self.fp.picard(&state, (plan.start, plan.end()), tol, max_iter)?;
            let start_state = std::mem::replace(&mut state, traj.last().clone());
            let a_k = norms_of(traj.basis(), &state).lap.powi(2);
            pending.push((plan.clone(), traj, log, start_state));
            Ok(a_k)
        })?;
        for (plan, traj, log, start_state) in pending {
            self.accept(plan.k, traj, &log, plan.g, plan.g < 1.0, start_state)?;
        }
        Ok(schedule)
    }

    fn run_practical(&mut self) -> Result<Vec<ScheduleState>> {
        let horizon = self.horizon;
        let policy = self.opts.policy;
        let mut reference = Vec::new();
        let mut start = 0.0;
        let mut len = horizon;
        let mut k = 1;
        let mut a_prev = norms_of(self.problem.system.basis(), &self.state).lap.powi(2);
        while start < horizon - 1e-12 * horizon.max(1.0) {
            let remaining = horizon - start;
            let mut cand = len.min(remaining);
            let (traj, log) = loop {
                match self.fp.picard(&self.state, (start, start + cand), self.opts.tol, self.opts.max_iter) {
                    Ok((traj, log)) if log.max_ratio() < self.opts.practical_ratio => break (traj, log),
                    Ok(_) | Err(Error::PicardNonConvergence { .. }) => {
                        cand *= 0.5;
                        if cand < 1e-12 {
                            return Err(Error::ScheduleUnderflow { k, length: cand });
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            let inputs = |l: f64| self.inputs_for(l);
            let mut plan = plan_step(k, start, horizon, a_prev, &inputs, &policy)?;
            // certified factor for the practical length from the same starting point
            let used = self.inputs_for(cand)?;
            let b_circ = policy.radius(cand);
            let c_circ = super::schedule::ball_radius_k(cand, b_circ, a_prev.max(1.0), &used);
            let g = super::ball::contraction_factor(cand, &used, c_circ);
            let start_state = self.state.clone();
            let a_k = self.accept(k, traj, &log, g, false, start_state)?;
            plan.a_k = Some(a_k);
            reference.push(plan);
            a_prev = a_k;
            start = if remaining - cand <= 1e-12 * horizon.max(1.0) { horizon } else { start + cand };
            len = (2.0 * cand).min(horizon);
            k += 1;
        }
        Ok(reference)
    }
}

/// Fit `C0, C1, C2` so the initial-state lemma holds for `reference -> start`.
pub(crate) fn fit_initial_constants(
    reg: &mut RegularizationInput,
    reference: &SpectralField,
    start: &SpectralField,
    phi1: f64,
    grad_phi: f64,
) {
    let (r, s) = (reference.norms(), start.norms());
    let fit = |num: f64, den: f64, current: f64| if den > 0.0 { current.max(num / den) } else { current };
    reg.lemma.c0 = fit(s.l2, phi1 * r.l2, reg.lemma.c0);
    reg.lemma.c1 = fit(s.grad, phi1 * r.grad, reg.lemma.c1);
    reg.lemma.c2 = fit(s.lap, grad_phi * r.h1, reg.lemma.c2);
}

pub(crate) fn solve_with(
    problem: &TdksProblem<'_>,
    opts: &SolveOptions,
    checks: CheckSetup,
) -> Result<SolveReport> {
    let horizon = problem.potentials.horizon();
    if problem.psi0.basis().domain() != problem.system.basis().domain()
        || problem.psi0.order() != problem.system.order()
        || problem.nonlinearity.basis().len() != problem.system.order()
    {
        return Err(Error::DomainMismatch("initial state, system and nonlinearity use different bases".into()));
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {}", opts.dt)));
    }
    let sched_norms = schedule_norms(problem.potentials, checks.regularization.as_ref());
    let mut runner = Runner {
        problem,
        opts,
        fp: FixedPointProblem {
            system: problem.system,
            nonlinearity: problem.nonlinearity,
            dt: opts.dt,
        },
        checks,
        sched_norms,
        horizon,
        subintervals: Vec::new(),
        estimates: Vec::new(),
        trajectory: None,
        state: problem.psi0.coeffs().clone(),
    };
    let schedule = match opts.mode {
        Mode::Certified => runner.run_certified()?,
        Mode::Practical => runner.run_practical()?,
    };
    let consts = constants_from_norms(&runner.sched_norms, horizon, problem.potentials.domain(), None)?;
    let trajectory = runner.trajectory.take().expect("at least one subinterval");
    Ok(SolveReport {
        mode: opts.mode,
        horizon,
        norm_drift: drift(&trajectory, problem.psi0.coeffs()),
        subintervals: runner.subintervals,
        schedule,
        nonlinear: opts.nonlinear.clone(),
        constants: consts,
        estimates: runner.estimates,
        trajectory: Some(trajectory),
    })
}

/// Nonlinear solve on `[0, T]` by Picard iteration on a covering of the horizon.
pub fn solve_tdks(problem: &TdksProblem<'_>, opts: &SolveOptions) -> Result<SolveReport> {
    if problem.potentials.has_rough_part() {
        return Err(Error::InvalidConfig("rough potentials go through solve_regularized".into()));
    }
    solve_with(problem, opts, CheckSetup::plain())
}
