use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potentials::{ControlSignal, Mollifier, PotentialSpec};
use crate::spectral::{BoxDomain, SpectralBasis};

/// Projected Galerkin system `i gamma' = A(t) gamma + g(t)` with
/// `A(t) = diag(lambda) + M_V0 + u(t) M_Vu + M_W0 + w(t) M_Wu`.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    basis: Arc<SpectralBasis>,
    lap_diag: DVector<f64>,
    m_v0: DMatrix<Complex64>,
    m_vu: DMatrix<Complex64>,
    m_w0: DMatrix<Complex64>,
    m_wu: DMatrix<Complex64>,
    u: ControlSignal,
    w: ControlSignal,
    breakpoints: Vec<f64>,
    rough: bool,
    mollified: bool,
}

/// `(M)_{jk} = (v psi_k, psi_j)` by grid quadrature, optionally mollifying
/// `v psi_k` before projecting.
pub fn multiplication_matrix(
    basis: &SpectralBasis,
    v: &[f64],
    mollifier: Option<&Mollifier>,
) -> Result<DMatrix<Complex64>> {
    let m = basis.len();
    let mut mat = DMatrix::zeros(m, m);
    if v.iter().all(|x| *x == 0.0) {
        return Ok(mat);
    }
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = Complex64::new(1.0, 0.0);
        let psi = basis.synthesize(&e);
        let prod: Vec<Complex64> = psi.iter().zip(v).map(|(p, x)| p * x).collect();
        let col = match mollifier {
            Some(moll) => basis.project_grid(&moll.apply(&prod))?,
            None => basis.project_grid(&prod)?,
        };
        mat.set_column(k, &col);
    }
    if mollifier.is_none() {
        // real symmetric up to quadrature round-off; remove the asymmetry
        let sym = (&mat + mat.transpose()) * Complex64::new(0.5, 0.0);
        mat = sym;
    }
    Ok(mat)
}

impl OdeSystem {
    pub fn new(basis: Arc<SpectralBasis>, potentials: &PotentialSpec) -> Result<Self> {
        Self::build(basis, potentials, None)
    }

    /// Rough potential enters as `phi_eps * E(W Phi)`, which is not Hermitian.
    pub fn regularized(basis: Arc<SpectralBasis>, potentials: &PotentialSpec, mollifier: &Mollifier) -> Result<Self> {
        Self::build(basis, potentials, Some(mollifier))
    }

    fn build(basis: Arc<SpectralBasis>, potentials: &PotentialSpec, mollifier: Option<&Mollifier>) -> Result<Self> {
        if basis.domain() != potentials.domain() {
            return Err(Error::DomainMismatch("potentials sampled on another grid".into()));
        }
        let rough = potentials.has_rough_part();
        let m_v0 = multiplication_matrix(&basis, potentials.v0_grid(), None)?;
        let m_vu = multiplication_matrix(&basis, potentials.vu_grid(), None)?;
        let (m_w0, m_wu) = if rough {
            (
                multiplication_matrix(&basis, potentials.w0_grid(), mollifier)?,
                multiplication_matrix(&basis, potentials.wu_grid(), mollifier)?,
            )
        } else {
            let m = basis.len();
            (DMatrix::zeros(m, m), DMatrix::zeros(m, m))
        };
        Ok(Self {
            lap_diag: DVector::from_column_slice(basis.eigenvalues()),
            basis,
            m_v0,
            m_vu,
            m_w0,
            m_wu,
            u: potentials.u().clone(),
            w: potentials.w().clone(),
            breakpoints: potentials.breakpoints(),
            rough,
            mollified: mollifier.is_some() && rough,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.len()
    }

    pub fn lap_diag(&self) -> &DVector<f64> {
        &self.lap_diag
    }

    pub fn matrices(&self) -> [&DMatrix<Complex64>; 4] {
        [&self.m_v0, &self.m_vu, &self.m_w0, &self.m_wu]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        self.u.horizon()
    }

    pub fn is_hermitian(&self) -> bool {
        !self.mollified
    }

    /// Control levels `(u, w)` in force at `t`.
    pub fn controls(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.u.value(t)?, if self.rough { self.w.value(t)? } else { 0.0 }))
    }

    /// Potential part `M_V0 + u M_Vu + M_W0 + w M_Wu` for given control levels.
    pub fn potential_matrix(&self, u: f64, w: f64) -> DMatrix<Complex64> {
        let mut a = self.m_v0.clone();
        if u != 0.0 {
            a += &self.m_vu * Complex64::new(u, 0.0);
        }
        if self.rough {
            a += &self.m_w0;
            if w != 0.0 {
                a += &self.m_wu * Complex64::new(w, 0.0);
            }
        }
        a
    }

    pub fn generator(&self, u: f64, w: f64) -> DMatrix<Complex64> {
        let mut a = self.potential_matrix(u, w);
        for (i, l) in self.lap_diag.iter().enumerate() {
            a[(i, i)] += Complex64::new(*l, 0.0);
        }
        a
    }

    /// `A(t) gamma`.
    pub fn apply_generator(&self, t: f64, gamma: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let (u, w) = self.controls(t)?;
        Ok(self.generator(u, w) * gamma)
    }

    /// Largest asymmetry `|M_jk - conj(M_kj)|` over the unmollified matrices.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let mats: Vec<&DMatrix<Complex64>> = if self.mollified {
            vec![&self.m_v0, &self.m_vu]
        } else {
            vec![&self.m_v0, &self.m_vu, &self.m_w0, &self.m_wu]
        };
        for m in mats {
            worst = worst.max((m - m.adjoint()).iter().fold(0.0, |a, z| a.max(z.norm())));
        }
        worst
    }
}

/// Build the Galerkin system for the first `m` modes of `domain`.
pub fn assemble(domain: &BoxDomain, m: usize, potentials: &PotentialSpec) -> Result<OdeSystem> {
    let basis = SpectralBasis::new(domain.clone(), m)?;
    OdeSystem::new(basis, potentials)
}
