use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::nonlinear::Nonlinearity;
use super::sampler::FieldSampler;
use crate::error::{Error, Result};
use crate::spectral::norms_of;

/// Inequalities whose constants are measured empirically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    /// `||f(a) - f(b)|| <= C_a (|a|_H1^2 + |b|_H1^2) ||a - b||`, `f = V_H(.) .`
    HartreeL2,
    /// `||f(a)||_H2 <= C_b |a|_H1^2 |a|_H2` (second field unused)
    HartreeH2Growth,
    /// `||f(a) - f(b)||_H2 <= C_c (|a|_H2^2 + |b|_H2^2) ||a - b||_H2`
    HartreeH2,
    /// `||grad(f(a) - f(b))|| <= C_H (|a|_H1^2 + |b|_H1^2) ||a - b||_H1`
    HartreeGradient,
    /// `||x(a) - x(b)|| <= K ||a - b||`, `x = V_xc(.) .`
    XcL2,
    /// `||x(a) - x(b)||_H2 <= K~ ||a - b||_H2`
    XcH2,
    /// `||r(a) - r(b)|| <= K1 ||a - b||`, `r = W_xc(.) .`
    RoughXcL2,
    /// `||r(a) - r(b)||_H1 <= K2 ||a - b||_H1`
    RoughXcH1,
}

impl Inequality {
    pub const ALL: [Inequality; 8] = [
        Inequality::HartreeL2,
        Inequality::HartreeH2Growth,
        Inequality::HartreeH2,
        Inequality::HartreeGradient,
        Inequality::XcL2,
        Inequality::XcH2,
        Inequality::RoughXcL2,
        Inequality::RoughXcH1,
    ];

    pub fn constant_name(&self) -> &'static str {
        match self {
            Inequality::HartreeL2 => "C_a",
            Inequality::HartreeH2Growth => "C_b",
            Inequality::HartreeH2 => "C_c",
            Inequality::HartreeGradient => "C_H",
            Inequality::XcL2 => "K",
            Inequality::XcH2 => "K_tilde",
            Inequality::RoughXcL2 => "K1",
            Inequality::RoughXcH1 => "K2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub inequality: Inequality,
    pub trials: usize,
    pub skipped: usize,
    pub max: f64,
    pub mean: f64,
    pub declared: Option<f64>,
    /// `max <= declared * (1 + tolerance)`; `None` without a declared bound.
    pub pass: Option<bool>,
    /// No quotient after the first 50 exceeds three times the running maximum.
    pub stabilized: bool,
    pub quotients: Vec<f64>,
}

/// Left side over structural right-hand factor for one pair, `None` when degenerate.
pub fn quotient(
    inequality: Inequality,
    nl: &Nonlinearity,
    phi: &DVector<Complex64>,
    lam: &DVector<Complex64>,
) -> Result<Option<f64>> {
    let basis = nl.basis();
    let n = |c: &DVector<Complex64>| norms_of(basis, c);
    let diff = phi - lam;
    let (np, nl_, nd) = (n(phi), n(lam), n(&diff));
    let ratio = |num: f64, den: f64| if den > 0.0 && num.is_finite() { Some(num / den) } else { None };
    Ok(match inequality {
        Inequality::HartreeL2 => {
            if nd.l2 == 0.0 {
                return Ok(None);
            }
            let df = nl.hartree_term(phi)? - nl.hartree_term(lam)?;
            ratio(df.norm(), (np.h1.powi(2) + nl_.h1.powi(2)) * nd.l2)
        }
        Inequality::HartreeH2Growth => {
            let f = nl.hartree_term(phi)?;
            ratio(n(&f).h2, np.h1.powi(2) * np.h2)
        }
        Inequality::HartreeH2 => {
            if nd.h2 == 0.0 {
                return Ok(None);
            }
            let df = nl.hartree_term(phi)? - nl.hartree_term(lam)?;
            ratio(n(&df).h2, (np.h2.powi(2) + nl_.h2.powi(2)) * nd.h2)
        }
        Inequality::HartreeGradient => {
            if nd.h1 == 0.0 {
                return Ok(None);
            }
            let df = nl.hartree_term(phi)? - nl.hartree_term(lam)?;
            ratio(n(&df).grad, (np.h1.powi(2) + nl_.h1.powi(2)) * nd.h1)
        }
        Inequality::XcL2 => {
            let dx = nl.xc_term(phi)? - nl.xc_term(lam)?;
            ratio(dx.norm(), nd.l2)
        }
        Inequality::XcH2 => {
            let dx = nl.xc_term(phi)? - nl.xc_term(lam)?;
            ratio(n(&dx).h2, nd.h2)
        }
        Inequality::RoughXcL2 => {
            let dx = nl.rough_xc_term(phi)? - nl.rough_xc_term(lam)?;
            ratio(dx.norm(), nd.l2)
        }
        Inequality::RoughXcH1 => {
            let dx = nl.rough_xc_term(phi)? - nl.rough_xc_term(lam)?;
            ratio(n(&dx).h1, nd.h1)
        }
    })
}

/// Sample `trials` pairs and report the empirical constant of `inequality`.
pub fn lipschitz_probe(
    inequality: Inequality,
    nl: &Nonlinearity,
    sampler: &mut FieldSampler,
    trials: usize,
    declared: Option<f64>,
    tolerance: f64,
) -> Result<LipschitzReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("lipschitz probe needs at least one trial".into()));
    }
    if sampler.basis().domain() != nl.basis().domain() || sampler.basis().len() != nl.basis().len() {
        return Err(Error::DomainMismatch("sampler and nonlinearity use different bases".into()));
    }
    let mut quotients = Vec::with_capacity(trials);
    let mut skipped = 0;
    let mut stabilized = true;
    let mut running = 0.0f64;
    for i in 0..trials {
        // every tenth pair is the degenerate diagonal
        let (phi, lam) = if i % 10 == 9 {
            let p = sampler.sample();
            (p.clone(), p)
        } else {
            sampler.sample_pair()
        };
        match quotient(inequality, nl, &phi, &lam)? {
            Some(q) => {
                if quotients.len() >= 50 && q > 3.0 * running {
                    stabilized = false;
                }
                running = running.max(q);
                quotients.push(q);
            }
            None => skipped += 1,
        }
    }
    let max = quotients.iter().cloned().fold(0.0, f64::max);
    let mean = if quotients.is_empty() {
        0.0
    } else {
        quotients.iter().sum::<f64>() / quotients.len() as f64
    };
    Ok(LipschitzReport {
        inequality,
        trials,
        skipped,
        max,
        mean,
        declared,
        pass: declared.map(|d| max <= d * (1.0 + tolerance)),
        stabilized,
        quotients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{Hartree, HartreeKernel, XcModel};
    use crate::spectral::{BoxDomain, SpectralBasis};

    fn setup() -> Nonlinearity {
        let d = BoxDomain::cube(1, std::f64::consts::PI, 48).unwrap();
        let basis = SpectralBasis::new(d.clone(), 12).unwrap();
        let h = Hartree::new(&d, HartreeKernel::Softened { a: 0.5 }, 1.0).unwrap();
        Nonlinearity::new(basis, Some(h), XcModel::saturating(1.0).unwrap()).unwrap()
    }

    #[test]
    fn diagonal_pairs_are_skipped() {
        let nl = setup();
        let mut s = FieldSampler::new(nl.basis().clone(), 1, 1.0, 1.0);
        let phi = s.sample();
        assert_eq!(quotient(Inequality::HartreeL2, &nl, &phi, &phi).unwrap(), None);
        let r = lipschitz_probe(Inequality::HartreeL2, &nl, &mut s, 20, None, 0.0).unwrap();
        assert_eq!(r.skipped, 2);
        assert_eq!(r.quotients.len(), 18);
        assert!(r.max.is_finite() && r.max > 0.0);
    }

    #[test]
    fn declared_saturating_constant_holds() {
        let nl = setup();
        let mut s = FieldSampler::new(nl.basis().clone(), 2, 3.0, 1.0);
        let r = lipschitz_probe(Inequality::XcL2, &nl, &mut s, 100, nl.xc().constants.k, 1e-9).unwrap();
        assert_eq!(r.pass, Some(true), "{}", r.max);
    }

    #[test]
    fn quotient_is_phase_invariant() {
        let nl = setup();
        let mut s = FieldSampler::new(nl.basis().clone(), 3, 1.0, 1.0);
        let (a, b) = s.sample_pair();
        let rot = Complex64::from_polar(1.0, 0.7);
        for ineq in [Inequality::HartreeL2, Inequality::HartreeH2, Inequality::HartreeGradient] {
            let q0 = quotient(ineq, &nl, &a, &b).unwrap().unwrap();
            let q1 = quotient(ineq, &nl, &(&a * rot), &(&b * rot)).unwrap().unwrap();
            assert!((q0 - q1).abs() <= 1e-10 * q0);
        }
    }
}
