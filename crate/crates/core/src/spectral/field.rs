use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::SpectralBasis;
use crate::error::{Error, Result};

/// Coefficients of a field in the leading `m` Dirichlet eigenfunctions.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<SpectralBasis>,
    coeffs: DVector<Complex64>,
}

impl SpectralField {
    pub fn new(basis: Arc<SpectralBasis>, coeffs: DVector<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<SpectralBasis>) -> Self {
        let m = basis.len();
        Self {
            basis,
            coeffs: DVector::zeros(m),
        }
    }

    /// Unit amplitude on the mode at enumeration position `k`.
    pub fn unit(basis: Arc<SpectralBasis>, k: usize) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[k] = Complex64::new(1.0, 0.0);
        f
    }

    /// Project an evaluable function sampled on the basis grid.
    pub fn project_fn<F>(basis: Arc<SpectralBasis>, f: F) -> Result<Self>
    where
        F: Fn(&[f64; 3]) -> Complex64,
    {
        let samples: Vec<Complex64> = basis.domain().points().map(|x| f(&x)).collect();
        Self::project_samples(basis, &samples)
    }

    pub fn project_samples(basis: Arc<SpectralBasis>, samples: &[Complex64]) -> Result<Self> {
        let coeffs = basis.project_grid(samples)?;
        Self::new(basis, coeffs)
    }

    pub fn synthesize(&self) -> Vec<Complex64> {
        self.basis.synthesize(&self.coeffs)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &DVector<Complex64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<Complex64> {
        self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// L2 inner product `(self, other)`, conjugate-linear in `other`.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn norms(&self) -> NormReport {
        norms_of(&self.basis, &self.coeffs)
    }

    /// Restriction to the leading `m` modes of `basis`, which must share the domain.
    pub fn truncate(&self, basis: Arc<SpectralBasis>) -> Result<SpectralField> {
        if basis.domain() != self.basis.domain() {
            return Err(Error::DomainMismatch("truncation target lives on another domain".into()));
        }
        if basis.len() > self.basis.len() {
            return Err(Error::InvalidInput("truncation target has more modes than the source".into()));
        }
        let coeffs = DVector::from_iterator(basis.len(), self.coeffs.iter().take(basis.len()).copied());
        SpectralField::new(basis, coeffs)
    }
}

/// Every norm used by the energy estimates, evaluated spectrally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub grad: f64,
    pub lap: f64,
    pub h1: f64,
    pub h2: f64,
    pub h_minus1: f64,
}

pub fn norms_of(basis: &SpectralBasis, coeffs: &DVector<Complex64>) -> NormReport {
    let mut l2 = 0.0;
    let mut grad = 0.0;
    let mut lap = 0.0;
    let mut h2 = 0.0;
    let mut hm1 = 0.0;
    for ((c, &lambda), k) in coeffs.iter().zip(basis.eigenvalues()).zip(basis.wavenumbers_sq()) {
        let a = c.norm_sqr();
        l2 += a;
        grad += lambda * a;
        lap += lambda * lambda * a;
        // sum over multi-indices |alpha| <= 2: pure second derivatives plus
        // each mixed pair once
        let pure: f64 = k.iter().map(|x| x * x).sum();
        let mixed = k[0] * k[1] + k[0] * k[2] + k[1] * k[2];
        h2 += (1.0 + lambda + pure + mixed) * a;
        hm1 += a / (1.0 + lambda);
    }
    NormReport {
        l2: l2.sqrt(),
        grad: grad.sqrt(),
        lap: lap.sqrt(),
        h1: (l2 + grad).sqrt(),
        h2: h2.sqrt(),
        h_minus1: hm1.sqrt(),
    }
}

/// Margins of the three truncation inequalities (full minus truncated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub l2_margin: f64,
    pub grad_margin: f64,
    pub lap_margin: f64,
}

impl TruncationReport {
    pub fn holds(&self) -> bool {
        self.l2_margin >= 0.0 && self.grad_margin >= 0.0 && self.lap_margin >= 0.0
    }
}

/// Check `||P u|| <= ||u||` in L2, gradient and Laplacian seminorms.
pub fn truncation_check(full: &SpectralField, truncated: &SpectralField) -> Result<TruncationReport> {
    if full.basis().domain() != truncated.basis().domain() {
        return Err(Error::DomainMismatch("fields live on different boxes".into()));
    }
    let f = full.norms();
    let t = truncated.norms();
    Ok(TruncationReport {
        l2_margin: f.l2 * f.l2 - t.l2 * t.l2,
        grad_margin: f.grad * f.grad - t.grad * t.grad,
        lap_margin: f.lap * f.lap - t.lap * t.lap,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::BoxDomain;

    fn basis_1d(m: usize) -> Arc<SpectralBasis> {
        SpectralBasis::new(BoxDomain::cube(1, PI, 4 * m + 4).unwrap(), m).unwrap()
    }

    #[test]
    fn unit_mode_norms() {
        let f = SpectralField::unit(basis_1d(4), 0);
        let n = f.norms();
        assert!((n.l2 - 1.0).abs() < 1e-15);
        assert!((n.grad - 1.0).abs() < 1e-15);
        assert!((n.lap - 1.0).abs() < 1e-15);
        assert!((n.h_minus1 - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_field_norms() {
        let n = SpectralField::zeros(basis_1d(4)).norms();
        assert_eq!(n, NormReport { l2: 0.0, grad: 0.0, lap: 0.0, h1: 0.0, h2: 0.0, h_minus1: 0.0 });
    }

    #[test]
    fn two_mode_sums() {
        let b = basis_1d(2);
        let f = SpectralField::new(b, DVector::from_element(2, Complex64::new(1.0, 0.0))).unwrap();
        let n = f.norms();
        assert!((n.grad.powi(2) - 5.0).abs() < 1e-13);
        assert!((n.lap.powi(2) - 17.0).abs() < 1e-13);
        assert!((n.h1.powi(2) - n.l2.powi(2) - n.grad.powi(2)).abs() < 1e-13);
    }

    #[test]
    fn truncation_of_identical_field_is_equality() {
        let b = basis_1d(4);
        let f = SpectralField::new(
            b.clone(),
            DVector::from_fn(4, |i, _| Complex64::new(i as f64 + 1.0, -0.5)),
        )
        .unwrap();
        let r = truncation_check(&f, &f).unwrap();
        assert_eq!((r.l2_margin, r.grad_margin, r.lap_margin), (0.0, 0.0, 0.0));
    }

    #[test]
    fn truncation_rejects_foreign_domain() {
        let a = SpectralField::zeros(basis_1d(4));
        let other = SpectralBasis::new(BoxDomain::cube(1, 2.0, 20).unwrap(), 4).unwrap();
        let b = SpectralField::zeros(other);
        assert!(truncation_check(&a, &b).is_err());
    }
}
