//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; the process fails if any criterion does.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdks_core::cli::commands::{nonlinear_constants, regularized_setup, solve_built, verify_trajectory};
use tdks_core::cli::study::{epsilon_study, lipschitz_study, modes_study, schedule_study, timestep_study};
use tdks_core::cli::{build, solve, RunConfig, SolveRun};
use tdks_core::energy::{constants, constants_from_norms};
use tdks_core::fixedpoint::{
    ball_radius, contraction_factor, smooth_problem, y_hat_distance, ContractionInputs, FixedPointProblem,
};
use tdks_core::galerkin::{integrate_reference, ReferenceConfig, Trajectory, TrajectoryMeta};
use tdks_core::potentials::{mollifier_norms, FieldSampler, MollifierSpec, PotentialNorms};
use tdks_core::spectral::{truncation_check, BoxDomain, SpectralBasis, SpectralField};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn preset(name: &str) -> RunConfig {
    RunConfig::load(&format!("preset:{name}")).expect("bundled preset loads")
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let spent = start.elapsed();
    if spent <= limit {
        Ok(())
    } else {
        Err(format!("took {:.1?}, limit {:?}", spent, limit))
    }
}

fn single_mode() -> Check {
    let start = Instant::now();
    let text = r#"
        [domain]
        dim = 1
        lengths = [3.141592653589793]
        grid = [32]
        [discretization]
        m = 4
        dt = 1e-3
        [time]
        horizon = 3.141592653589793
        [initial]
        kind = "eigenmode"
        index = [1]
        amplitude = 1.0
    "#;
    let cfg = RunConfig::from_toml(text, Path::new(".")).map_err(|e| e.to_string())?;
    let run = solve(&cfg).map_err(|e| e.to_string())?;
    let traj = run.report().trajectory();
    let gap = (traj.last() + traj.first()).norm();
    within(Duration::from_secs(1), start)?;
    ensure(gap <= 1e-6, format!("||psi(pi) + psi0|| = {gap:.3e}"))
}

fn norm_conservation(desk: &SolveRun) -> Check {
    let drift = desk.report().norm_drift;
    ensure(drift <= 1e-8, format!("max drift {drift:.3e}"))
}

fn estimates_on_presets() -> Check {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["linear", "desk", "schedule", "epsilon"] {
        let cfg = preset(name);
        let built = build(&cfg).map_err(|e| e.to_string())?;
        let run = solve_built(&cfg, &built).map_err(|e| e.to_string())?;
        let rep = run.report();
        let verified = verify_trajectory(&cfg, &built, rep.trajectory()).map_err(|e| e.to_string())?;
        let checks: usize = rep.estimates.iter().map(|r| r.summary.len()).sum();
        let pass = rep.estimates_passed() && verified.passed() && checks > 0;
        ok &= pass;
        lines.push(format!("{name}: {checks} checks over {} subintervals {}", rep.estimates.len(), if pass { "ok" } else { "FAILED" }));
    }
    within(Duration::from_secs(60), start)?;
    ensure(ok, lines.join("; "))
}

fn zero_norms(v: f64) -> PotentialNorms {
    PotentialNorms {
        v_inf: v,
        grad_v_inf: 0.0,
        lap_v_inf: 0.0,
        v_1inf: v,
        v_2inf: v,
        w_inf: 0.0,
        w_1inf: 0.0,
    }
}

fn constant_formulas() -> Check {
    let d = BoxDomain::cube(1, PI, 32).map_err(|e| e.to_string())?;
    let zero = constants_from_norms(&zero_norms(0.0), 1.0, &d, None).map_err(|e| e.to_string())?;
    let unit = constants_from_norms(&zero_norms(1.0), 1.0, &d, None).map_err(|e| e.to_string())?;
    let got = (zero.c_grad, unit.c1_lap, zero.c2_lap, zero.c3_lap);
    ensure(got == (2.0, 4.0, 0.0, 1.0), format!("C_grad, C1, C2, C3 = {got:?}"))
}

fn straight_path(basis: &std::sync::Arc<SpectralBasis>, times: &[f64], a: &DVector<Complex64>, b: &DVector<Complex64>) -> Trajectory {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let states = times
        .iter()
        .map(|&t| {
            let s = (t - t0) / (t1 - t0);
            a * Complex64::new(1.0 - s, 0.0) + b * Complex64::new(s, 0.0)
        })
        .collect();
    let meta = TrajectoryMeta {
        integrator: "path".into(),
        dt: 0.0,
        m: basis.len(),
        config_hash: None,
    };
    Trajectory::new(basis.clone(), times.to_vec(), states, meta).unwrap()
}

fn contraction() -> Check {
    let start = Instant::now();
    let cfg = preset("desk");
    let built = build(&cfg).map_err(|e| e.to_string())?;
    let nlc = nonlinear_constants(&cfg, &built).map_err(|e| e.to_string())?;
    let b_circ = cfg.fixedpoint.ball_b;
    let psi0_norms = built.psi0.norms();
    let at = |t: f64| -> (ContractionInputs, f64, f64) {
        let c = constants(&built.potentials, t, &built.domain, None).unwrap();
        let inp = ContractionInputs::new(&c, &nlc);
        let c_circ = ball_radius(b_circ, t, &psi0_norms, &inp);
        (inp, c_circ, contraction_factor(t, &inp, c_circ))
    };
    let (mut lo, mut hi) = (1e-14f64, cfg.time.horizon);
    if at(hi).2 < 0.5 {
        return Err(format!("g(T) = {} never reaches 0.5", at(hi).2));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if at(mid).2 < 0.5 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let t_hat = lo;
    let (_, c_circ, g) = at(t_hat);
    if (g - 0.5).abs() > 0.1 {
        return Err(format!("bisection gave g = {g}"));
    }
    let system = built.system.as_ref().unwrap();
    let fp = FixedPointProblem {
        system,
        nonlinearity: &built.nonlinearity,
        dt: t_hat / 64.0,
    };
    let times = fp.time_grid((0.0, t_hat)).map_err(|e| e.to_string())?;
    let basis = built.basis.clone();
    let radius = c_circ.sqrt();
    let mut sampler = FieldSampler::new(basis.clone(), cfg.run.seed, 1.0, 1.0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut draw = || sampler.sample_with_lap_norm(radius * 0.99);
        let l1 = straight_path(&basis, &times, &draw(), &draw());
        let l2 = straight_path(&basis, &times, &draw(), &draw());
        let a1 = fp.apply(&l1, built.psi0.coeffs()).map_err(|e| e.to_string())?;
        let a2 = fp.apply(&l2, built.psi0.coeffs()).map_err(|e| e.to_string())?;
        worst = worst.max(y_hat_distance(&a1, &a2).unwrap() / y_hat_distance(&l1, &l2).unwrap());
    }
    let (_, log) = fp.picard(built.psi0.coeffs(), (0.0, t_hat), 1e-13, 60).map_err(|e| e.to_string())?;
    let picard = log.max_ratio();
    within(Duration::from_secs(120), start)?;
    ensure(
        worst <= g * (1.0 + 1e-6) && picard <= g,
        format!("T_hat = {t_hat:.3e}, g = {g:.3}, max pair ratio {worst:.3e}, max Picard ratio {picard:.3e}"),
    )
}

fn oracle(desk: &SolveRun, cfg: &RunConfig) -> Check {
    let start = Instant::now();
    let built = build(cfg).map_err(|e| e.to_string())?;
    let reference = integrate_reference(&ReferenceConfig {
        system: built.system.as_ref().unwrap(),
        nonlinearity: &built.nonlinearity,
        gamma0: built.psi0.coeffs().clone(),
        interval: (0.0, cfg.time.horizon),
        dt: cfg.discretization.dt,
        refine: 64,
    })
    .map_err(|e| e.to_string())?;
    let gap = (desk.report().endpoint() - reference.last()).norm();
    within(Duration::from_secs(300), start)?;
    ensure(gap <= 1e-6, format!("||psi(T) - psi_ref(T)|| = {gap:.3e}"))
}

fn orders() -> Check {
    let cfg = preset("desk");
    let dt = timestep_study(&cfg).map_err(|e| e.to_string())?;
    let (m_ref, modes) = modes_study(&cfg).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = modes.iter().filter_map(|r| r.ratio).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        (dt.slope - 2.0).abs() <= 0.2 && !ratios.is_empty() && min_ratio >= 10.0,
        format!(
            "dt slope {:.3} on [0, {}]; m-ladder ratios {:?} against m = {m_ref}",
            dt.slope,
            dt.t_end,
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>()
        ),
    )
}

fn truncation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for trial in 0..1000 {
        let dim = 1 + trial % 3;
        let lengths: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..4.0)).collect();
        let grid = vec![if dim == 3 { 24 } else { 48 }; dim];
        let domain = BoxDomain::new(lengths, grid).map_err(|e| e.to_string())?;
        let m = rng.random_range(2..=20);
        let keep = rng.random_range(1..m);
        let full = SpectralBasis::new(domain.clone(), m).map_err(|e| e.to_string())?;
        let coeffs = DVector::from_fn(m, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let f = SpectralField::new(full, coeffs).map_err(|e| e.to_string())?;
        let small = SpectralBasis::new(domain, keep).map_err(|e| e.to_string())?;
        let t = f.truncate(small).map_err(|e| e.to_string())?;
        if !truncation_check(&f, &t).map_err(|e| e.to_string())?.holds() {
            violations += 1;
        }
    }
    ensure(violations == 0, format!("{violations} violations in 1000 fields"))
}

fn lipschitz() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["desk", "epsilon"] {
        let rows = lipschitz_study(&preset(name)).map_err(|e| e.to_string())?;
        for r in rows {
            let pass = r.report.stabilized && r.phase_variation <= 1e-10 && r.report.trials == 200 && r.report.pass != Some(false);
            ok &= pass;
            parts.push(format!("{name}/{} max {:.3} phase {:.1e}{}", r.constant, r.report.max, r.phase_variation, if pass { "" } else { " FAILED" }));
        }
    }
    ensure(ok, parts.join("; "))
}

fn mollifier_laws() -> Check {
    let cfg = preset("epsilon");
    let built = build(&cfg).map_err(|e| e.to_string())?;
    let setup = regularized_setup(&cfg, &built);
    let dim = built.domain.dim();
    let ladder = &cfg.study.eps_ladder;
    let mut grads = Vec::new();
    let mut errors = Vec::new();
    let mut c0_fit = Vec::new();
    let mut c2_fit = Vec::new();
    for &eps in ladder {
        let (phi1, grad_phi) = mollifier_norms(&MollifierSpec::new(eps).map_err(|e| e.to_string())?, dim);
        let sm = smooth_problem(&setup, eps).map_err(|e| e.to_string())?;
        let (raw, smooth) = (sm.raw_psi0.norms(), sm.psi0.norms());
        grads.push(grad_phi);
        errors.push((sm.psi0.coeffs() - sm.raw_psi0.coeffs()).norm());
        c0_fit.push(smooth.l2 / (phi1 * raw.l2));
        c2_fit.push(smooth.lap / (grad_phi * raw.h1));
    }
    let doubling: Vec<f64> = grads.windows(2).map(|w| w[1] / w[0]).collect();
    let doubles = doubling.iter().all(|r| (r - 2.0).abs() <= 1e-6);
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    // fitted constants are the ladder maxima; Young's inequality caps C0 at 1
    let c0 = c0_fit.iter().copied().fold(0.0, f64::max);
    let c2 = c2_fit.iter().copied().fold(0.0, f64::max);
    let lemma = c0 <= 1.0 + 1e-9 && c2.is_finite() && c2_fit.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    ensure(
        doubles && monotone && lemma,
        format!("grad ratios {doubling:?}; initial errors {}; C0 {c0_fit:.4?}; C2 {c2_fit:.4?}", sci(&errors)),
    )
}

fn epsilon_split() -> Check {
    let (rows, _) = epsilon_study(&preset("epsilon")).map_err(|e| e.to_string())?;
    let spread = |f: &dyn Fn(&tdks_core::cli::study::EpsilonRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        (hi - lo) / lo
    };
    let (alpha, beta) = (spread(&|r| r.c_alpha), spread(&|r| r.c_beta));
    let grows = rows.windows(2).all(|w| w[1].c_eps > w[0].c_eps);
    let cauchy: Vec<f64> = rows.iter().filter_map(|r| r.cauchy_y).collect();
    let decreasing = cauchy.len() >= 2 && cauchy.windows(2).all(|w| w[1] < w[0]);
    let passed = rows.iter().all(|r| r.estimates_passed);
    ensure(
        alpha <= 0.05 && beta <= 0.05 && grows && decreasing && passed,
        format!(
            "L2 spread {:.2}%, grad spread {:.2}%, C_eps {:?}, Cauchy {}",
            100.0 * alpha,
            100.0 * beta,
            rows.iter().map(|r| r.c_eps.round()).collect::<Vec<_>>(),
            sci(&cauchy)
        ),
    )
}

fn covering_schedule() -> Check {
    let start = Instant::now();
    let cfg = preset("schedule");
    let rep = schedule_study(&cfg).map_err(|e| e.to_string())?;
    let c1 = rep.constants.c1_lap;
    let mut rule = true;
    let mut a_prev = 1.0f64;
    for (i, s) in rep.schedule.iter().enumerate() {
        let b = 1.0 / ((i + 1) as f64 * a_prev.max(1.0).powi(3));
        rule &= s.k == i + 1 && s.b_k == b && s.t_d_rule == b / c1 && s.g < 1.0 && s.t_d.is_finite();
        a_prev = s.a_k.unwrap_or(f64::NAN);
    }
    let total: f64 = rep.schedule.iter().map(|s| s.t_d).sum();
    let last = rep.schedule.last().map_or(0.0, |s| s.end());
    let clipped = rep.schedule.iter().filter(|s| s.clipped).count();
    within(Duration::from_secs(60), start)?;
    ensure(
        rule && last == rep.horizon && (total - rep.horizon).abs() <= 1e-12 * rep.horizon && clipped <= 1,
        format!("{} steps, sum {total}, end {last}, max g {:.3}", rep.schedule.len(), rep.schedule.iter().map(|s| s.g).fold(0.0, f64::max)),
    )
}

fn main() {
    let desk_cfg = preset("desk");
    let started = Instant::now();
    let desk = solve(&desk_cfg).expect("desk preset solves");
    let desk_time = started.elapsed();

    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("single-mode analytic solution", Box::new(single_mode)),
        ("norm conservation on the desk run", Box::new(|| {
            if desk_time > Duration::from_secs(30) {
                return Err(format!("desk solve took {desk_time:.1?}"));
            }
            norm_conservation(&desk)
        })),
        ("energy estimates on every preset", Box::new(estimates_on_presets)),
        ("constant formulas", Box::new(constant_formulas)),
        ("contraction certification", Box::new(contraction)),
        ("oracle equivalence", Box::new(|| oracle(&desk, &desk_cfg))),
        ("dt and m convergence orders", Box::new(orders)),
        ("truncation never increases norms", Box::new(truncation)),
        ("Lipschitz probes", Box::new(lipschitz)),
        ("mollifier laws", Box::new(mollifier_laws)),
        ("epsilon-independent bounds", Box::new(epsilon_split)),
        ("covering schedule", Box::new(covering_schedule)),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2} {name} ({:.1?}): {detail}", i + 1, t.elapsed());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
