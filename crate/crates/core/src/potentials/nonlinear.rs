use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use super::hartree::Hartree;
use super::mollifier::Mollifier;
use super::xc::XcModel;
use crate::error::{Error, Result};
use crate::spectral::{SpectralBasis, SpectralField};

/// `F(phi) = P_m[(V_H(phi) + V_xc(phi)) phi]`, optionally plus the mollified
/// rough term `P_m[phi_eps * E(W_xc(phi) phi)]`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    basis: Arc<SpectralBasis>,
    hartree: Option<Hartree>,
    xc: XcModel,
    rough_xc: Option<(XcModel, Mollifier)>,
}

impl Nonlinearity {
    pub fn new(basis: Arc<SpectralBasis>, hartree: Option<Hartree>, xc: XcModel) -> Result<Self> {
        if let Some(h) = &hartree {
            if h.domain() != basis.domain() {
                return Err(Error::DomainMismatch("hartree operator built for another grid".into()));
            }
        }
        xc.validate()?;
        Ok(Self {
            basis,
            hartree,
            xc,
            rough_xc: None,
        })
    }

    pub fn zero(basis: Arc<SpectralBasis>) -> Self {
        Self {
            basis,
            hartree: None,
            xc: XcModel::none(),
            rough_xc: None,
        }
    }

    pub fn with_rough_xc(mut self, model: XcModel, mollifier: Mollifier) -> Result<Self> {
        model.validate()?;
        if mollifier.domain() != self.basis.domain() {
            return Err(Error::DomainMismatch("mollifier built for another grid".into()));
        }
        self.rough_xc = if model.is_none() { None } else { Some((model, mollifier)) };
        Ok(self)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn hartree(&self) -> Option<&Hartree> {
        self.hartree.as_ref()
    }

    pub fn xc(&self) -> &XcModel {
        &self.xc
    }

    pub fn rough_xc(&self) -> Option<&XcModel> {
        self.rough_xc.as_ref().map(|(m, _)| m)
    }

    /// True when `F` vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.hartree.as_ref().is_none_or(|h| h.coupling() == 0.0) && self.xc.is_none() && self.rough_xc.is_none()
    }

    /// True when `(F(phi), phi)` is real for every `phi` (no mollified term).
    pub fn is_real_potential(&self) -> bool {
        self.rough_xc.is_none()
    }

    /// Real multiplying potential `V_H + V_xc` at the grid samples.
    pub fn potential_on_grid(&self, samples: &[Complex64]) -> Result<Vec<f64>> {
        let rho: Vec<f64> = samples.iter().map(|z| z.norm_sqr()).collect();
        let mut v = match &self.hartree {
            Some(h) => h.potential_from_density(&rho),
            None => vec![0.0; rho.len()],
        };
        if !self.xc.is_none() {
            for (vi, x) in v.iter_mut().zip(self.xc.potential(&rho)?) {
                *vi += x;
            }
        }
        Ok(v)
    }

    fn multiply_project(&self, samples: &[Complex64], v: &[f64]) -> Result<DVector<Complex64>> {
        let prod: Vec<Complex64> = samples.iter().zip(v).map(|(z, p)| z * p).collect();
        self.basis.project_grid(&prod)
    }

    pub fn apply(&self, coeffs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let samples = self.basis.synthesize(coeffs);
        let v = self.potential_on_grid(&samples)?;
        let mut out = self.multiply_project(&samples, &v)?;
        if let Some((model, moll)) = &self.rough_xc {
            out += self.rough_term_from_samples(&samples, model, moll)?;
        }
        Ok(out)
    }

    fn rough_term_from_samples(
        &self,
        samples: &[Complex64],
        model: &XcModel,
        moll: &Mollifier,
    ) -> Result<DVector<Complex64>> {
        let rho: Vec<f64> = samples.iter().map(|z| z.norm_sqr()).collect();
        let w = model.potential(&rho)?;
        let prod: Vec<Complex64> = samples.iter().zip(&w).map(|(z, p)| z * p).collect();
        self.basis.project_grid(&moll.apply(&prod))
    }

    /// `P_m[V_H(phi) phi]`, zero without a Hartree operator.
    pub fn hartree_term(&self, coeffs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let samples = self.basis.synthesize(coeffs);
        match &self.hartree {
            Some(h) => self.multiply_project(&samples, &h.potential_from_samples(&samples)),
            None => Ok(DVector::zeros(coeffs.len())),
        }
    }

    /// `P_m[V_xc(phi) phi]`.
    pub fn xc_term(&self, coeffs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let samples = self.basis.synthesize(coeffs);
        let rho: Vec<f64> = samples.iter().map(|z| z.norm_sqr()).collect();
        self.multiply_project(&samples, &self.xc.potential(&rho)?)
    }

    /// `P_m[W_xc(phi) phi]` without mollification; zero when no rough model is set.
    pub fn rough_xc_term(&self, coeffs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        match &self.rough_xc {
            Some((model, _)) => {
                let samples = self.basis.synthesize(coeffs);
                let rho: Vec<f64> = samples.iter().map(|z| z.norm_sqr()).collect();
                self.multiply_project(&samples, &model.potential(&rho)?)
            }
            None => Ok(DVector::zeros(coeffs.len())),
        }
    }
}

/// Projection of `(V_H(phi) + V_xc(phi)) phi` (plus any mollified rough term) onto the basis.
#[allow(non_snake_case)]
pub fn nonlinear_F(phi: &SpectralField, nl: &Nonlinearity) -> Result<SpectralField> {
    if phi.basis().domain() != nl.basis().domain() || phi.order() != nl.basis().len() {
        return Err(Error::DomainMismatch("field and nonlinearity use different bases".into()));
    }
    SpectralField::new(nl.basis().clone(), nl.apply(phi.coeffs())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{FieldSampler, HartreeKernel};
    use crate::spectral::BoxDomain;

    fn setup() -> Nonlinearity {
        let d = BoxDomain::cube(1, std::f64::consts::PI, 64).unwrap();
        let basis = SpectralBasis::new(d.clone(), 16).unwrap();
        let h = Hartree::new(&d, HartreeKernel::Softened { a: 0.5 }, 1.0).unwrap();
        Nonlinearity::new(basis, Some(h), XcModel::saturating(0.5).unwrap()).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let nl = setup();
        let z = DVector::zeros(16);
        assert_eq!(nl.apply(&z).unwrap().norm(), 0.0);
    }

    #[test]
    fn energy_pairing_is_real() {
        let nl = setup();
        let mut s = FieldSampler::new(nl.basis().clone(), 7, 2.0, 1.0);
        for _ in 0..20 {
            let phi = s.sample();
            let f = nl.apply(&phi).unwrap();
            let pairing = phi.dotc(&f);
            assert!(pairing.im.abs() <= 1e-10 * (1.0 + pairing.re.abs()), "{pairing}");
        }
    }

    #[test]
    fn single_mode_matches_direct_quadrature() {
        let nl = setup();
        let basis = nl.basis().clone();
        let mut c = DVector::zeros(16);
        c[0] = Complex64::new(0.8, 0.0);
        let f = nl.hartree_term(&c).unwrap();
        // oracle: direct O(N^2) sum for V_H and direct projection of V_H phi
        let d = basis.domain();
        let h = d.spacing(0);
        let n = d.num_nodes();
        let phi: Vec<f64> = (0..n)
            .map(|i| 0.8 * (2.0 / std::f64::consts::PI).sqrt() * d.point(i)[0].sin())
            .collect();
        let vh: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let r = d.point(i)[0] - d.point(j)[0];
                        phi[j] * phi[j] * h / (r * r + 0.25).sqrt()
                    })
                    .sum()
            })
            .collect();
        for (k, mode) in basis.modes().iter().enumerate() {
            let (_, ef) = d.eigenpair(mode).unwrap();
            let direct: f64 = (0..n).map(|i| vh[i] * phi[i] * ef.eval(&d.point(i)) * h).sum();
            assert!((f[k].re - direct).abs() < 1e-12, "{k}");
            assert!(f[k].im.abs() < 1e-14);
        }
    }
}
