use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::convolution::Convolver;
use super::quadrature::integrate;
use crate::error::{Error, Result};
use crate::spectral::BoxDomain;

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

fn bump_radial_derivative(r: f64) -> f64 {
    let s = 1.0 - r * r;
    if s <= 0.0 {
        return 0.0;
    }
    -2.0 * r / (s * s) * (-1.0 / s).exp()
}

fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn radial<F: Fn(f64) -> f64>(f: F) -> f64 {
    integrate(f, 0.0, 1.0, 32, 16)
}

/// `integral over the unit ball of exp(-1/(1-|x|^2))` in `dim` dimensions.
pub fn bump_mass(dim: usize) -> f64 {
    sphere_area(dim) * radial(|r| r.powi(dim as i32 - 1) * bump(r * r))
}

/// Standard bump `exp(-1/(1-|x|^2))` normalised to unit mass, scaled to radius `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("mollifier radius must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `phi_eps(x) = eps^-d phi(x / eps)`.
    pub fn eval(&self, dim: usize, x: &[f64]) -> f64 {
        let r2: f64 = x[..dim].iter().map(|v| (v / self.epsilon).powi(2)).sum();
        bump(r2) / bump_mass(dim) / self.epsilon.powi(dim as i32)
    }
}

/// `(||phi_1||_L1, ||grad phi_eps||_L1)` by radial quadrature over the support.
pub fn mollifier_norms(spec: &MollifierSpec, dim: usize) -> (f64, f64) {
    let mass = bump_mass(dim);
    let area = sphere_area(dim);
    let phi1 = area * radial(|r| r.powi(dim as i32 - 1) * bump(r * r)) / mass;
    let eps = spec.epsilon;
    // |grad phi_eps|(r) = eps^(-d-1) |phi'(r/eps)|, integrated over r in [0, eps]
    let grad = area
        * integrate(
            |r| r.powi(dim as i32 - 1) * bump_radial_derivative(r / eps).abs(),
            0.0,
            eps,
            32,
            16,
        )
        / mass
        / eps.powi(dim as i32 + 1);
    (phi1, grad)
}

/// Discrete mollifier on a domain grid: node weights `phi_eps(offset)` renormalised
/// to unit sum, applied to the zero extension of the target.
#[derive(Debug, Clone)]
pub struct Mollifier {
    domain: BoxDomain,
    spec: MollifierSpec,
    conv: Arc<Convolver>,
}

impl Mollifier {
    pub fn new(domain: &BoxDomain, spec: MollifierSpec) -> Result<Self> {
        let min_len = domain.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
        if spec.epsilon > min_len {
            return Err(Error::InvalidInput(format!(
                "mollifier radius {} exceeds the box side {min_len}",
                spec.epsilon
            )));
        }
        let dim = domain.dim();
        let h: Vec<f64> = (0..dim).map(|a| domain.spacing(a)).collect();
        let reach: Vec<usize> = (0..dim)
            .map(|a| ((spec.epsilon / h[a]).floor() as usize).min(domain.grid_points()[a] - 1))
            .collect();
        let weight = |o: &[isize]| {
            let x: Vec<f64> = o.iter().zip(&h).map(|(&k, hk)| k as f64 * hk).collect();
            spec.eval(dim, &x)
        };
        let mut total = 0.0;
        let count: usize = reach.iter().map(|r| 2 * r + 1).product();
        for flat in 0..count {
            let mut rem = flat;
            let mut o = vec![0isize; dim];
            for a in (0..dim).rev() {
                let span = 2 * reach[a] + 1;
                o[a] = (rem % span) as isize - reach[a] as isize;
                rem /= span;
            }
            total += weight(&o);
        }
        let conv = Convolver::new(domain.grid_points(), &reach, |o| weight(o) / total);
        Ok(Self {
            domain: domain.clone(),
            spec,
            conv: Arc::new(conv),
        })
    }

    pub fn spec(&self) -> MollifierSpec {
        self.spec
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn apply(&self, target: &[Complex64]) -> Vec<Complex64> {
        self.conv.apply(target)
    }

    pub fn apply_real(&self, target: &[f64]) -> Vec<f64> {
        self.conv.apply_real(target)
    }
}

/// One-shot mollification of grid samples.
pub fn mollify(target: &[Complex64], domain: &BoxDomain, spec: MollifierSpec) -> Result<Vec<Complex64>> {
    if target.len() != domain.num_nodes() {
        return Err(Error::InvalidInput("target does not match the grid".into()));
    }
    Ok(Mollifier::new(domain, spec)?.apply(target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass_in_every_dimension() {
        for dim in 1..=3 {
            let spec = MollifierSpec::new(0.5).unwrap();
            let (phi1, _) = mollifier_norms(&spec, dim);
            assert!((phi1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_norm_scales_inversely() {
        let a = mollifier_norms(&MollifierSpec::new(0.2).unwrap(), 3).1;
        let b = mollifier_norms(&MollifierSpec::new(0.1).unwrap(), 3).1;
        assert!((b / a - 2.0).abs() < 1e-10);
        // in 1D, ||phi'||_L1 = 2 phi(0) since phi is unimodal
        let g1 = mollifier_norms(&MollifierSpec::new(1.0).unwrap(), 1).1;
        assert!((g1 - 2.0 * (-1f64).exp() / bump_mass(1)).abs() < 1e-10);
    }

    #[test]
    fn constant_preserved_away_from_boundary() {
        let d = BoxDomain::cube(1, 1.0, 63).unwrap();
        let m = Mollifier::new(&d, MollifierSpec::new(0.1).unwrap()).unwrap();
        let out = m.apply_real(&vec![1.0; 63]);
        assert!((out[31] - 1.0).abs() < 1e-12);
        assert!(out[0] < 1.0);
    }

    #[test]
    fn rejects_oversized_radius() {
        let d = BoxDomain::cube(1, 1.0, 15).unwrap();
        assert!(Mollifier::new(&d, MollifierSpec::new(1.5).unwrap()).is_err());
        assert!(MollifierSpec::new(0.0).is_err());
    }
}
