use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use super::*;
use crate::energy::constants_from_norms;
use crate::galerkin::{solve_auxiliary, CrankNicolson, Forcing, OdeSystem, Trajectory, TrajectoryMeta};
use crate::potentials::{
    ControlSignal, FieldSampler, Hartree, HartreeKernel, Nonlinearity, PotentialSpec, RealProfile,
    XcModel,
};
use crate::spectral::{norms_of, BoxDomain, NormReport, SpectralBasis, SpectralField};

fn inputs(c1: f64, c_c: f64, k_tilde: f64) -> ContractionInputs {
    ContractionInputs {
        c_z: 1.0,
        c1_lap: c1,
        c2_lap: 0.0,
        c3_lap: 1.0,
        c_b: 0.0,
        c_c,
        k_tilde,
    }
}

fn report(grad_sq: f64, lap_sq: f64) -> NormReport {
    NormReport {
        l2: 0.0,
        grad: grad_sq.sqrt(),
        lap: lap_sq.sqrt(),
        h1: grad_sq.sqrt(),
        h2: lap_sq.sqrt(),
        h_minus1: 0.0,
    }
}

#[test]
fn ball_radius_examples() {
    let c = inputs(4.0, 0.0, 0.0);
    let r = ball_radius(1.0, 0.1, &report(1.0, 1.0), &c);
    assert!((r - 2.0 * 0.4f64.exp()).abs() < 1e-14);
    assert!((r - 2.98365).abs() < 1e-5);
    assert_eq!(ball_radius(1.0, 0.0, &report(0.0, 0.0), &c), 1.0);
    assert!(ball_radius(2.0, 0.1, &report(1.0, 1.0), &c) > r);
}

#[test]
fn invariance_bound_examples() {
    let mut c = inputs(0.0, 0.0, 1.0);
    c.c_b = 1.0;
    assert_eq!(invariance_bound(1.0, &c, 1.0, 10.0).unwrap(), 0.25);
    assert_eq!(invariance_bound(1.0, &c, 1.0, 0.1).unwrap(), 0.1);
    let wide = invariance_bound(1.0, &c, 1.0, f64::INFINITY).unwrap();
    c.c3_lap = 2.0;
    assert_eq!(invariance_bound(1.0, &c, 1.0, f64::INFINITY).unwrap(), 0.5 * wide);
    assert!(invariance_bound(1e-14, &c, 1.0, 1.0).unwrap() < 1e-13);
    c.k_tilde = f64::NAN;
    assert!(invariance_bound(1.0, &c, 1.0, 1.0).is_err());
}

#[test]
fn contraction_factor_examples() {
    let c = inputs(0.0, 0.0, 1.0);
    assert_eq!(contraction_factor(0.25, &c, 1.0), 0.5);
    let c = inputs(3.0, 0.5, 1.0);
    assert_eq!(contraction_factor(0.0, &c, 2.0), 0.0);
    let ladder: Vec<f64> = [0.01, 0.02, 0.04].iter().map(|&t| contraction_factor(t, &c, 2.0)).collect();
    assert!(ladder[0] < ladder[1] && ladder[1] < ladder[2]);
}

#[test]
fn schedule_rule_without_halving() {
    let c = inputs(2.0, 0.0, 0.0);
    let f = move |_: f64| Ok(c);
    let policy = BallPolicy::default();
    let s1 = plan_step(1, 0.0, 10.0, 1.0, &f, &policy).unwrap();
    assert_eq!((s1.b_k, s1.t_d), (1.0, 0.5));
    assert_eq!(s1.halvings, 0);
    let s2 = plan_step(2, 0.5, 10.0, 1.0, &f, &policy).unwrap();
    assert_eq!((s2.b_k, s2.t_d), (0.5, 0.25));
    // a_{k-1} below one is floored
    let s = plan_step(3, 0.0, 10.0, 0.2, &f, &policy).unwrap();
    assert_eq!(s.b_k, 1.0 / 3.0);
}

#[test]
fn schedule_covers_the_horizon_exactly() {
    let c = inputs(2.0, 0.0, 0.0);
    let f = move |_: f64| Ok(c);
    let sched = covering_schedule(3.0, 1.0, &f, &BallPolicy::default(), |_| Ok(1.0)).unwrap();
    let total: f64 = sched.iter().map(|s| s.t_d).sum();
    assert!((total - 3.0).abs() < 1e-12);
    assert!(sched.last().unwrap().clipped);
    assert!(sched.iter().all(|s| s.g < 1.0 && s.a_k == Some(1.0)));
    for w in sched.windows(2) {
        assert!((w[1].start - w[0].end()).abs() < 1e-15);
    }
    for s in &sched[..sched.len() - 1] {
        assert_eq!(s.b_k, 1.0 / (s.k as f64 * s.a_prev.powi(3)));
    }
}

#[test]
fn schedule_halves_until_contractive_and_reports_underflow() {
    let c = inputs(1.0, 0.0, 4.0);
    let f = move |_: f64| Ok(c);
    let s = plan_step(1, 0.0, 100.0, 1.0, &f, &BallPolicy::default()).unwrap();
    assert!(s.halvings > 0);
    assert!(s.g < 1.0);
    assert_eq!(s.t_d, s.t_d_rule / 2f64.powi(s.halvings as i32));
    let hopeless = inputs(1.0, 0.0, 1e30);
    let f = move |_: f64| Ok(hopeless);
    let err = plan_step(1, 0.0, 1.0, 1.0, &f, &BallPolicy::default()).unwrap_err();
    assert!(matches!(err, crate::Error::ScheduleUnderflow { k: 1, .. }));
}

fn line() -> BoxDomain {
    BoxDomain::cube(1, PI, 64).unwrap()
}

fn desk_spec(horizon: f64) -> PotentialSpec {
    PotentialSpec::smooth(
        &line(),
        RealProfile::Harmonic {
            strength: 0.5,
            center: None,
        },
        RealProfile::Linear { slope: 1.0, axis: 0 },
        ControlSignal::new(vec![0.0, 0.5 * horizon], vec![0.3, -0.3], horizon).unwrap(),
    )
    .unwrap()
}

fn gaussian(basis: Arc<SpectralBasis>, amp: f64) -> SpectralField {
    SpectralField::project_fn(basis, |x| {
        let r = x[0] - 1.3;
        Complex64::new(amp * (-5.0 * r * r).exp(), 0.2 * amp * (-3.0 * r * r).exp())
    })
    .unwrap()
}

fn nonlinearity(basis: Arc<SpectralBasis>) -> Nonlinearity {
    let h = Hartree::new(basis.domain(), HartreeKernel::Softened { a: 1.0 }, 1.0).unwrap();
    Nonlinearity::new(basis, Some(h), XcModel::saturating(0.5).unwrap()).unwrap()
}

#[test]
fn linear_problem_matches_the_auxiliary_solve() {
    let spec = desk_spec(0.5);
    let basis = SpectralBasis::new(line(), 12).unwrap();
    let sys = OdeSystem::new(basis.clone(), &spec).unwrap();
    let nl = Nonlinearity::zero(basis.clone());
    let psi0 = gaussian(basis, 1.0);
    let fp = FixedPointProblem {
        system: &sys,
        nonlinearity: &nl,
        dt: 1e-2,
    };
    let (traj, log) = fp.picard(psi0.coeffs(), (0.0, 0.5), 1e-10, 10).unwrap();
    assert_eq!(log.iterations(), 2);
    assert_eq!(log.differences[1], 0.0);
    let aux = solve_auxiliary(&sys, &Forcing::Zero, &psi0, (0.0, 0.5), 1e-2).unwrap();
    assert!(y_hat_distance(&traj, &aux).unwrap() <= 1e-10);

    // certified lengths need a small Z norm at the start
    let small = gaussian(sys.basis().clone(), 0.02);
    let opts = SolveOptions::new(Mode::Certified, 1e-2, NonlinearConstants::zero());
    let problem = TdksProblem {
        potentials: &spec,
        system: &sys,
        nonlinearity: &nl,
        psi0: small.clone(),
    };
    let rep = solve_tdks(&problem, &opts).unwrap();
    let direct = CrankNicolson::new(&sys)
        .run(small.coeffs(), &Forcing::Zero, rep.trajectory().times())
        .unwrap();
    assert!((rep.endpoint() - direct.last().unwrap()).norm() <= 1e-10);
    assert!(rep.schedule.len() > 1);
    assert!(rep.estimates_passed());
    let total: f64 = rep.schedule.iter().map(|s| s.t_d).sum();
    assert!((total - 0.5).abs() < 1e-12);
}

#[test]
fn zero_data_stays_zero() {
    let spec = desk_spec(0.3);
    let basis = SpectralBasis::new(line(), 10).unwrap();
    let sys = OdeSystem::new(basis.clone(), &spec).unwrap();
    let nl = nonlinearity(basis.clone());
    let fp = FixedPointProblem {
        system: &sys,
        nonlinearity: &nl,
        dt: 1e-2,
    };
    let zero = DVector::zeros(basis.len());
    let (traj, _) = fp.picard(&zero, (0.0, 0.3), 1e-12, 5).unwrap();
    assert!(traj.states().iter().all(|s| s.norm() == 0.0));
}

#[test]
fn map_is_deterministic() {
    let spec = desk_spec(0.2);
    let basis = SpectralBasis::new(line(), 10).unwrap();
    let sys = OdeSystem::new(basis.clone(), &spec).unwrap();
    let nl = nonlinearity(basis.clone());
    let fp = FixedPointProblem {
        system: &sys,
        nonlinearity: &nl,
        dt: 1e-2,
    };
    let psi0 = gaussian(basis.clone(), 1.0);
    let lam = Trajectory::constant(basis, fp.time_grid((0.0, 0.2)).unwrap(), psi0.coeffs()).unwrap();
    let a = apply_A(&fp, &lam, psi0.coeffs()).unwrap();
    let b = apply_A(&fp, &lam, psi0.coeffs()).unwrap();
    assert_eq!(a.states(), b.states());
    assert_eq!(a.first(), psi0.coeffs());
}

struct Desk {
    spec: PotentialSpec,
    sys: OdeSystem,
    nl: Nonlinearity,
    psi0: SpectralField,
}

fn desk(horizon: f64, m: usize) -> Desk {
    let spec = desk_spec(horizon);
    let basis = SpectralBasis::new(line(), m).unwrap();
    let sys = OdeSystem::new(basis.clone(), &spec).unwrap();
    let nl = nonlinearity(basis.clone());
    let psi0 = gaussian(basis, 1.0);
    Desk { spec, sys, nl, psi0 }
}

#[test]
fn fixed_point_residual_and_uniqueness() {
    let d = desk(0.2, 12);
    let fp = FixedPointProblem {
        system: &d.sys,
        nonlinearity: &d.nl,
        dt: 1e-2,
    };
    let tol = 1e-10;
    let (psi, log) = fp.picard(d.psi0.coeffs(), (0.0, 0.2), tol, 60).unwrap();
    let g = log.max_ratio();
    assert!(g < 1.0);
    let residual = y_hat_distance(&psi, &fp.apply(&psi, d.psi0.coeffs()).unwrap()).unwrap();
    assert!(residual <= tol / (1.0 - g));
    let other = Trajectory::constant(d.sys.basis().clone(), psi.times().to_vec(), &DVector::zeros(12)).unwrap();
    let (psi2, _) = fp.picard_from(other, d.psi0.coeffs(), tol, 60).unwrap();
    assert!(y_hat_distance(&psi, &psi2).unwrap() <= 2.0 * tol / (1.0 - g));
}

#[test]
fn picard_reports_non_convergence() {
    let d = desk(0.2, 12);
    let fp = FixedPointProblem {
        system: &d.sys,
        nonlinearity: &d.nl,
        dt: 1e-2,
    };
    match fp.picard(d.psi0.coeffs(), (0.0, 0.2), 1e-14, 2) {
        Err(crate::Error::PicardNonConvergence { iterations, ratios, .. }) => {
            assert_eq!(iterations, 2);
            assert_eq!(ratios.len(), 1);
        }
        other => panic!("expected non-convergence, got {:?}", other.map(|(_, l)| l)),
    }
}

#[test]
fn restart_gives_the_same_endpoint() {
    let d = desk(0.4, 12);
    let fp = FixedPointProblem {
        system: &d.sys,
        nonlinearity: &d.nl,
        dt: 1e-2,
    };
    let (whole, _) = fp.picard(d.psi0.coeffs(), (0.0, 0.4), 1e-12, 80).unwrap();
    let (first, _) = fp.picard(d.psi0.coeffs(), (0.0, 0.2), 1e-12, 80).unwrap();
    let (second, _) = fp.picard(first.last(), (0.2, 0.4), 1e-12, 80).unwrap();
    assert!((whole.last() - second.last()).norm() <= 1e-8);
}

#[test]
fn nonlinear_solve_conserves_norm_and_passes_estimates() {
    let d = desk(0.5, 16);
    let nlc = NonlinearConstants::measure(&d.nl, 1.0, 3, 40).unwrap();
    assert!(nlc.c_b > 0.0 && nlc.c_c > 0.0 && nlc.k_tilde > 0.0);
    let opts = SolveOptions::new(Mode::Practical, 1e-2, nlc);
    let problem = TdksProblem {
        potentials: &d.spec,
        system: &d.sys,
        nonlinearity: &d.nl,
        psi0: d.psi0.clone(),
    };
    let rep = solve_tdks(&problem, &opts).unwrap();
    assert!(rep.norm_drift <= 1e-8, "drift {}", rep.norm_drift);
    assert!(rep.estimates_passed());
    assert!(rep.subintervals.iter().all(|s| s.max_ratio < 0.5));
    let end = rep.subintervals.last().unwrap().end;
    assert!((end - 0.5).abs() < 1e-12);
    assert_eq!(rep.schedule.len(), rep.subintervals.len());
}

fn in_ball_path(
    basis: &Arc<SpectralBasis>,
    times: &[f64],
    a: &DVector<Complex64>,
    b: &DVector<Complex64>,
) -> Trajectory {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let states = times
        .iter()
        .map(|&t| {
            let s = (t - t0) / (t1 - t0);
            a * Complex64::new(1.0 - s, 0.0) + b * Complex64::new(s, 0.0)
        })
        .collect();
    Trajectory::new(
        basis.clone(),
        times.to_vec(),
        states,
        TrajectoryMeta {
            integrator: "test".into(),
            dt: 0.0,
            m: basis.len(),
            config_hash: None,
        },
    )
    .unwrap()
}

/// Small-amplitude desk with the certified contraction length.
fn certified_setup() -> (Desk, ContractionInputs, f64, f64) {
    let d = desk(1.0, 10);
    let nlc = NonlinearConstants::measure(&d.nl, 1.0, 11, 40).unwrap();
    let t_hat = 1e-3;
    let c = constants_from_norms(d.spec.norms(), t_hat, d.spec.domain(), None).unwrap();
    let inp = ContractionInputs::new(&c, &nlc);
    let c_circ = ball_radius(1e-3, t_hat, &norms_of(d.sys.basis(), &DVector::zeros(10)), &inp);
    (d, inp, t_hat, c_circ)
}

#[test]
fn ball_is_invariant_and_map_contracts_on_certified_length() {
    let (d, inp, t_hat, c_circ) = certified_setup();
    let g = contraction_factor(t_hat, &inp, c_circ);
    assert!(g < 1.0, "g = {g}");
    assert!(t_hat <= invariance_bound(1e-3, &inp, c_circ, 1.0).unwrap());
    let basis = d.sys.basis().clone();
    let fp = FixedPointProblem {
        system: &d.sys,
        nonlinearity: &d.nl,
        dt: 1e-4,
    };
    let times = fp.time_grid((0.0, t_hat)).unwrap();
    let radius = c_circ.sqrt();
    let mut sampler = FieldSampler::new(basis.clone(), 5, 1.0, 1.0);
    let psi0 = DVector::zeros(basis.len());
    for _ in 0..10 {
        let mut draw = || sampler.sample_with_lap_norm(radius * 0.99);
        let l1 = in_ball_path(&basis, &times, &draw(), &draw());
        let l2 = in_ball_path(&basis, &times, &draw(), &draw());
        let (a1, a2) = (fp.apply(&l1, &psi0).unwrap(), fp.apply(&l2, &psi0).unwrap());
        let z_max = a1.norms().iter().map(|n| n.lap.powi(2)).fold(0.0, f64::max);
        assert!(z_max <= c_circ);
        let ratio = y_hat_distance(&a1, &a2).unwrap() / y_hat_distance(&l1, &l2).unwrap();
        assert!(ratio <= g * (1.0 + 1e-6), "ratio {ratio} vs g {g}");
    }
}

#[test]
fn regularized_solve_reduces_to_smooth_problem_without_rough_data() {
    let d = desk(0.3, 12);
    let samples = d.psi0.synthesize();
    let basis = d.sys.basis().clone();
    let setup = RegularizedSetup {
        potentials: &d.spec,
        basis: basis.clone(),
        hartree: d.nl.hartree().cloned(),
        xc: d.nl.xc().clone(),
        rough_xc: XcModel::none(),
        psi0_samples: &samples,
        seed: 1,
        probe_trials: 5,
    };
    let opts = SolveOptions::new(Mode::Practical, 1e-2, NonlinearConstants::zero());
    let rep = solve_regularized(&setup, 0.05, &opts).unwrap();
    assert!(rep.solve.estimates_passed(), "{:?}", rep.solve.estimates.iter().map(|e| e.failures()).collect::<Vec<_>>());
    assert!(rep.solve.estimates.iter().all(|e| e.variant == crate::energy::Variant::Epsilon));
    let problem = TdksProblem {
        potentials: &d.spec,
        system: &d.sys,
        nonlinearity: &d.nl,
        psi0: d.psi0.clone(),
    };
    let plain = solve_tdks(&problem, &opts).unwrap();
    let diff = (plain.endpoint() - rep.solve.endpoint()).norm();
    let init = (d.psi0.coeffs() - rep.solve.trajectory().first()).norm();
    assert!(init > 0.0 && init < 0.1);
    // the flow is Lipschitz in the data over this short horizon
    assert!(diff <= 5.0 * init + rep.initial_error, "diff {diff}, init {init}");
    assert!(rep.bounds.c_alpha > 0.0 && rep.bounds.c_gamma > 0.0);
}

#[test]
fn rough_potentials_are_routed_to_the_regularized_solve() {
    let domain = line();
    let spec = PotentialSpec::new(
        &domain,
        RealProfile::zero(),
        RealProfile::zero(),
        ControlSignal::zero(0.2).unwrap(),
        RealProfile::Tent {
            height: 1.0,
            radius: 0.5,
            center: None,
        },
        RealProfile::zero(),
        ControlSignal::constant(1.0, 0.2).unwrap(),
    )
    .unwrap();
    let basis = SpectralBasis::new(domain, 8).unwrap();
    let sys = OdeSystem::new(basis.clone(), &spec);
    if let Ok(sys) = sys {
        let nl = Nonlinearity::zero(basis.clone());
        let problem = TdksProblem {
            potentials: &spec,
            system: &sys,
            nonlinearity: &nl,
            psi0: gaussian(basis, 1.0),
        };
        let opts = SolveOptions::new(Mode::Practical, 1e-2, NonlinearConstants::zero());
        assert!(matches!(solve_tdks(&problem, &opts), Err(crate::Error::InvalidConfig(_))));
    }
}
