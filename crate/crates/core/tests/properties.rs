use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

use tdks_core::energy::constants_from_norms;
use tdks_core::fixedpoint::{contraction_factor, covering_schedule, invariance_bound, BallPolicy, ContractionInputs};
use tdks_core::galerkin::{integrate_linear, Forcing, OdeSystem};
use tdks_core::potentials::{
    mollifier_norms, ControlSignal, Hartree, HartreeKernel, MollifierSpec, Nonlinearity, PotentialNorms, PotentialSpec,
    RealProfile, XcModel,
};
use tdks_core::spectral::{truncation_check, BoxDomain, SpectralBasis, SpectralField};

fn coeffs(m: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), m)
}

fn field(basis: &Arc<SpectralBasis>, c: &[(f64, f64)]) -> SpectralField {
    let v = DVector::from_iterator(c.len(), c.iter().map(|&(a, b)| Complex64::new(a, b)));
    SpectralField::new(basis.clone(), v).unwrap()
}

fn norms(v: f64, g: f64, l: f64) -> PotentialNorms {
    PotentialNorms {
        v_inf: v,
        grad_v_inf: g,
        lap_v_inf: l,
        v_1inf: v + g,
        v_2inf: v + g + l,
        w_inf: 0.0,
        w_1inf: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trip_and_parseval(c in coeffs(12)) {
        let basis = SpectralBasis::new(BoxDomain::cube(1, 2.0, 32).unwrap(), 12).unwrap();
        let f = field(&basis, &c);
        let samples = f.synthesize();
        let back = SpectralField::project_samples(basis.clone(), &samples).unwrap();
        prop_assert!((back.coeffs() - f.coeffs()).norm() <= 1e-12 * (1.0 + f.coeffs().norm()));
        let grid_l2: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * basis.domain().cell_volume();
        prop_assert!((grid_l2 - f.norms().l2.powi(2)).abs() <= 1e-10 * (1.0 + grid_l2));
    }

    #[test]
    fn truncation_never_increases_norms(c in coeffs(20), keep in 1usize..20) {
        let domain = BoxDomain::new(vec![PI, 1.5], vec![24, 24]).unwrap();
        let full = SpectralBasis::new(domain.clone(), 20).unwrap();
        let f = field(&full, &c);
        let small = SpectralBasis::new(domain, keep).unwrap();
        let t = f.truncate(small).unwrap();
        prop_assert!(truncation_check(&f, &t).unwrap().holds());
    }

    #[test]
    fn constants_grow_with_potential_size_and_horizon(
        v in 0.0..3.0f64, g in 0.0..3.0f64, l in 0.0..3.0f64, t in 0.0..2.0f64,
        dv in 0.0..1.0f64, dt in 0.0..1.0f64,
    ) {
        let d = BoxDomain::cube(1, PI, 16).unwrap();
        let a = constants_from_norms(&norms(v, g, l), t, &d, None).unwrap();
        let b = constants_from_norms(&norms(v + dv, g + dv, l + dv), t + dt, &d, None).unwrap();
        prop_assert!(b.c_grad >= a.c_grad);
        prop_assert!(b.c1_lap >= a.c1_lap);
        prop_assert!(b.c2_lap >= a.c2_lap);
        prop_assert!(b.c3_lap >= a.c3_lap);
        prop_assert!(a.c3_lap >= 1.0);
    }

    #[test]
    fn contraction_factor_increases_and_invariance_bound_scales(
        c1 in 0.0..5.0f64, cc in 0.0..2.0f64, kt in 0.01..2.0f64, c_circ in 0.5..5.0f64,
        t in 1e-4..1.0f64, grow in 1.01..3.0f64,
    ) {
        let inp = ContractionInputs { c_z: 1.7, c1_lap: c1, c2_lap: 0.3, c3_lap: 1.2, c_b: 0.4, c_c: cc, k_tilde: kt };
        prop_assert!(contraction_factor(t * grow, &inp, c_circ) > contraction_factor(t, &inp, c_circ));
        let base = invariance_bound(1.0, &inp, c_circ, f64::INFINITY).unwrap();
        let mut heavier = inp;
        heavier.c3_lap *= grow;
        let scaled = invariance_bound(1.0, &heavier, c_circ, f64::INFINITY).unwrap();
        prop_assert!((scaled * grow - base).abs() <= 1e-12 * base);
    }

    #[test]
    fn covering_schedule_reaches_the_horizon(
        c1 in 0.5..2.0f64, kt in 0.0..1.5f64, horizon in 0.1..1.5f64,
        a_seq in prop::collection::vec(0.1..1.3f64, 8),
    ) {
        let inp = ContractionInputs { c_z: 1.0, c1_lap: c1, c2_lap: 0.0, c3_lap: 1.0, c_b: 0.0, c_c: 0.0, k_tilde: kt };
        let f = move |_: f64| Ok(inp);
        let mut i = 0;
        let sched = covering_schedule(horizon, 1.0, &f, &BallPolicy::default(), |_| {
            i += 1;
            Ok(a_seq[i % a_seq.len()])
        }).unwrap();
        let total: f64 = sched.iter().map(|s| s.t_d).sum();
        prop_assert!((total - horizon).abs() <= 1e-12 * horizon.max(1.0));
        for s in &sched {
            prop_assert!(s.g < 1.0);
            prop_assert_eq!(s.b_k, 1.0 / (s.k as f64 * s.a_prev.powi(3)));
            prop_assert!(s.a_prev >= 1.0);
        }
    }

    #[test]
    fn mollifier_gradient_norm_scales_inversely(eps in 0.01..0.5f64, dim in 1usize..=3) {
        let (m1, g1) = mollifier_norms(&MollifierSpec::new(eps).unwrap(), dim);
        let (m2, g2) = mollifier_norms(&MollifierSpec::new(eps / 2.0).unwrap(), dim);
        prop_assert!((m1 - 1.0).abs() < 1e-9 && (m2 - 1.0).abs() < 1e-9);
        prop_assert!((g2 / g1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn nonlinearity_commutes_with_global_phase(c in coeffs(10), theta in 0.0..(2.0 * PI)) {
        let basis = SpectralBasis::new(BoxDomain::cube(1, PI, 32).unwrap(), 10).unwrap();
        let h = Hartree::new(basis.domain(), HartreeKernel::Softened { a: 0.5 }, 1.0).unwrap();
        let nl = Nonlinearity::new(basis.clone(), Some(h), XcModel::saturating(0.7).unwrap()).unwrap();
        let phi = field(&basis, &c).into_coeffs();
        let rot = Complex64::from_polar(1.0, theta);
        let lhs = nl.apply(&(&phi * rot)).unwrap();
        let rhs = nl.apply(&phi).unwrap() * rot;
        prop_assert!((lhs - &rhs).norm() <= 1e-11 * (1.0 + rhs.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn crank_nicolson_conserves_norm_for_real_potentials(c in coeffs(8), u in -2.0..2.0f64, strength in 0.0..2.0f64) {
        let d = BoxDomain::cube(1, PI, 32).unwrap();
        let spec = PotentialSpec::smooth(
            &d,
            RealProfile::Harmonic { strength, center: None },
            RealProfile::Linear { slope: 1.0, axis: 0 },
            ControlSignal::new(vec![0.0, 0.3], vec![u, -u], 0.6).unwrap(),
        ).unwrap();
        let basis = SpectralBasis::new(d, 8).unwrap();
        let sys = OdeSystem::new(basis.clone(), &spec).unwrap();
        let psi0 = field(&basis, &c);
        let traj = integrate_linear(&sys, psi0.coeffs(), &Forcing::Zero, (0.0, 0.6), 0.05).unwrap();
        let n0 = psi0.coeffs().norm();
        for s in traj.states() {
            prop_assert!((s.norm() - n0).abs() <= 1e-12 * (1.0 + n0));
        }
    }
}
