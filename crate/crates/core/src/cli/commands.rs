use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{build, Built, RunConfig};
use crate::energy::{check_estimates, constants, EstimateReport, EstimateSummary, Variant};
use crate::error::{Error, Result};
use crate::fixedpoint::{
    regularization_input, smooth_problem, solve_regularized, solve_tdks, FixedPointProblem, NonlinearConstants,
    RegularizedReport, RegularizedSetup, SolveReport, TdksProblem,
};
use crate::galerkin::{Trajectory, TrajectoryMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ESTIMATE: i32 = 4;

/// A failure together with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl Failure {
    pub fn config(error: Error) -> Self {
        Self { code: EXIT_CONFIG, error }
    }

    pub fn solver(error: Error) -> Self {
        Self { code: EXIT_SOLVER, error }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

pub enum SolveRun {
    Plain(SolveReport),
    Regularized(RegularizedReport),
}

impl SolveRun {
    pub fn report(&self) -> &SolveReport {
        match self {
            SolveRun::Plain(r) => r,
            SolveRun::Regularized(r) => &r.solve,
        }
    }

    pub fn passed(&self) -> bool {
        self.report().estimates_passed()
    }
}

pub fn regularized_setup<'a>(cfg: &RunConfig, built: &'a Built) -> RegularizedSetup<'a> {
    RegularizedSetup {
        potentials: &built.potentials,
        basis: built.basis.clone(),
        hartree: built.hartree.clone(),
        xc: cfg.nonlinear.xc.clone(),
        rough_xc: cfg.nonlinear.rough_xc.clone(),
        psi0_samples: &built.psi0_samples,
        seed: cfg.run.seed,
        probe_trials: cfg.regularization.as_ref().map_or(20, |r| r.probe_trials),
    }
}

pub fn nonlinear_constants(cfg: &RunConfig, built: &Built) -> Result<NonlinearConstants> {
    if built.nonlinearity.is_zero() {
        return Ok(NonlinearConstants::zero());
    }
    NonlinearConstants::measure(
        &built.nonlinearity,
        cfg.fixedpoint.probe_radius,
        cfg.run.seed,
        cfg.fixedpoint.probe_trials,
    )
}

/// Solve the configured problem; a `[regularization]` section selects the
/// mollified path.
pub fn solve(cfg: &RunConfig) -> Outcome<SolveRun> {
    let built = build(cfg).map_err(Failure::config)?;
    solve_built(cfg, &built)
}

pub fn solve_built(cfg: &RunConfig, built: &Built) -> Outcome<SolveRun> {
    let run = || -> Result<SolveRun> {
        let nlc = nonlinear_constants(cfg, built)?;
        let opts = cfg.options(nlc);
        let hash = cfg.hash();
        let mut out = match &cfg.regularization {
            Some(r) => SolveRun::Regularized(solve_regularized(&regularized_setup(cfg, built), r.epsilon, &opts)?),
            None => {
                let system = built.system.as_ref().expect("smooth potentials assemble a system");
                let problem = TdksProblem {
                    potentials: &built.potentials,
                    system,
                    nonlinearity: &built.nonlinearity,
                    psi0: built.psi0.clone(),
                };
                SolveRun::Plain(solve_tdks(&problem, &opts)?)
            }
        };
        let report = match &mut out {
            SolveRun::Plain(r) => r,
            SolveRun::Regularized(r) => &mut r.solve,
        };
        if let Some(t) = report.trajectory.as_mut() {
            t.meta.config_hash = Some(hash);
            t.meta.dt = cfg.discretization.dt;
        }
        Ok(out)
    };
    run().map_err(Failure::solver)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_estimates_csv(path: &Path, reports: &[EstimateReport]) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "subinterval,id,t,observed,bound,slack,pass")?;
    for (k, r) in reports.iter().enumerate() {
        for row in &r.rows {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                k + 1,
                row.id,
                row.t,
                row.observed,
                row.bound,
                row.slack,
                row.pass
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_schedule_csv<W: Write>(out: &mut W, report: &SolveReport) -> Result<()> {
    writeln!(out, "k,start,end,a_prev,a_k,b_k,t_d_rule,t_d,b_circ,c_circ,g,halvings,clipped,invariant")?;
    for s in &report.schedule {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.k,
            s.start,
            s.end(),
            s.a_prev,
            s.a_k.map_or(String::new(), |a| a.to_string()),
            s.b_k,
            s.t_d_rule,
            s.t_d,
            s.b_circ,
            s.c_circ,
            s.g,
            s.halvings,
            s.clipped,
            s.invariant
        )?;
    }
    Ok(())
}

/// Trajectory (`trajectory.bin` + `trajectory.json`), `endpoint.csv`,
/// `report.json`, `estimates.csv` and `schedule.csv`.
pub fn write_solve(cfg: &RunConfig, run: &SolveRun, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let report = run.report();
    let traj = report.trajectory();
    let mut f = create(&out.join("trajectory.bin"))?;
    traj.write_binary(&mut f)?;
    f.flush()?;
    let mut f = create(&out.join("trajectory.json"))?;
    traj.write_sidecar(&mut f)?;
    f.flush()?;
    let mut f = create(&out.join("endpoint.csv"))?;
    writeln!(f, "j,re,im")?;
    for (j, c) in traj.last().iter().enumerate() {
        writeln!(f, "{},{},{}", j + 1, c.re, c.im)?;
    }
    f.flush()?;
    write_estimates_csv(&out.join("estimates.csv"), &report.estimates)?;
    let mut f = create(&out.join("schedule.csv"))?;
    write_schedule_csv(&mut f, report)?;
    f.flush()?;
    let regularized = match run {
        SolveRun::Regularized(r) => json!({
            "epsilon": r.epsilon,
            "constants": r.regularized,
            "bounds": r.bounds,
            "initial_error": r.initial_error,
        }),
        SolveRun::Plain(_) => serde_json::Value::Null,
    };
    let doc = json!({
        "command": "solve",
        "config_hash": cfg.hash(),
        "estimates_passed": report.estimates_passed(),
        "certified": report.certified(),
        "norm_drift": report.norm_drift,
        "endpoint_norm": traj.last().norm(),
        "report": report,
        "regularized": regularized,
        "artifacts": {
            "trajectory": "trajectory.bin",
            "sidecar": "trajectory.json",
            "endpoint": "endpoint.csv",
            "estimates": "estimates.csv",
            "schedule": "schedule.csv",
        },
    });
    write_json(&out.join("report.json"), &doc)
}

pub fn write_json(path: &Path, doc: &serde_json::Value) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, doc).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SidecarDoc {
    integrator: String,
    dt: f64,
    m: usize,
    #[serde(default)]
    config_hash: Option<String>,
}

/// Sidecar path for a binary trajectory: same stem, `.json` extension.
pub fn sidecar_path(trajectory: &Path) -> PathBuf {
    trajectory.with_extension("json")
}

/// Read a trajectory written by `solve`, rejecting a config-hash mismatch.
pub fn load_trajectory(cfg: &RunConfig, built: &Built, path: &Path) -> Outcome<Trajectory> {
    let text = fs::read_to_string(sidecar_path(path)).map_err(|e| Failure::config(e.into()))?;
    let side: SidecarDoc = serde_json::from_str(&text).map_err(|e| Failure::config(Error::Parse(e.to_string())))?;
    let expected = cfg.hash();
    let found = side.config_hash.clone().unwrap_or_default();
    if found != expected {
        return Err(Failure::config(Error::HashMismatch { expected, found }));
    }
    let meta = TrajectoryMeta {
        integrator: side.integrator,
        dt: side.dt,
        m: side.m,
        config_hash: side.config_hash,
    };
    let mut f = fs::File::open(path).map_err(|e| Failure::config(e.into()))?;
    Trajectory::read_binary(&mut f, built.basis.clone(), meta).map_err(Failure::config)
}

/// Estimate checks of a stored trajectory over its whole span, against the
/// configured initial state, plus an `initial` row comparing the first
/// stored state with it.
pub fn verify_trajectory(cfg: &RunConfig, built: &Built, traj: &Trajectory) -> Result<EstimateReport> {
    let span = traj.end() - traj.start();
    let (mut report, reference) = match &cfg.regularization {
        None => {
            let system = built.system.as_ref().expect("smooth potentials assemble a system");
            let fp = FixedPointProblem {
                system,
                nonlinearity: &built.nonlinearity,
                dt: cfg.discretization.dt,
            };
            let datum = if built.nonlinearity.is_zero() {
                None
            } else {
                Some(fp.datum(traj)?)
            };
            let consts = constants(&built.potentials, span, &built.domain, None)?;
            let r = check_estimates(traj, datum.as_ref(), &built.psi0, &consts, Variant::Plain)?;
            (r, built.psi0.coeffs().clone())
        }
        Some(r) => {
            let setup = regularized_setup(cfg, built);
            let sm = smooth_problem(&setup, r.epsilon)?;
            let reg = regularization_input(&setup, &sm)?;
            let fp = FixedPointProblem {
                system: &sm.system,
                nonlinearity: &sm.nonlinearity,
                dt: cfg.discretization.dt,
            };
            let datum = if sm.nonlinearity.is_zero() {
                None
            } else {
                Some(fp.datum(traj)?)
            };
            let consts = constants(&built.potentials, span, &built.domain, Some(&reg))?;
            let r = check_estimates(traj, datum.as_ref(), &sm.raw_psi0, &consts, Variant::Epsilon)?;
            (r, sm.psi0.coeffs().clone())
        }
    };
    let gap = (traj.first() - &reference).norm();
    let bound = 1e-10 * reference.norm().max(1.0);
    report.summary.push(EstimateSummary {
        id: "initial".into(),
        samples: 1,
        observed: gap,
        bound,
        margin: bound - gap,
        slack: 0.0,
        pass: gap <= bound,
    });
    Ok(report)
}

pub fn verify(cfg: &RunConfig, trajectory: &Path) -> Outcome<EstimateReport> {
    let built = build(cfg).map_err(Failure::config)?;
    let traj = load_trajectory(cfg, &built, trajectory)?;
    verify_trajectory(cfg, &built, &traj).map_err(Failure::solver)
}

pub fn write_verify(cfg: &RunConfig, report: &EstimateReport, trajectory: &Path, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut f = create(&out.join("verify_estimates.csv"))?;
    report.write_csv(&mut f)?;
    f.flush()?;
    let doc = json!({
        "command": "verify",
        "config_hash": cfg.hash(),
        "trajectory": trajectory.display().to_string(),
        "passed": report.passed(),
        "report": report.to_json(),
    });
    write_json(&out.join("verify.json"), &doc)
}
