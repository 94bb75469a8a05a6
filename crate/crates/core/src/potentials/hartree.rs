use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::convolution::Convolver;
use super::quadrature::integrate;
use crate::error::{Error, Result};
use crate::spectral::{BoxDomain, SpectralField};

/// Interaction kernel of the Hartree term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HartreeKernel {
    /// `1/|x|`, three-dimensional only; the singular node carries the cell average.
    Coulomb,
    /// `1/sqrt(|x|^2 + a^2)`.
    Softened { a: f64 },
}

impl HartreeKernel {
    pub fn label(&self) -> String {
        match self {
            HartreeKernel::Coulomb => "coulomb".into(),
            HartreeKernel::Softened { a } => format!("softened(a={a})"),
        }
    }
}

/// Mean of `1/|x|` over the cell `[-h0/2, h0/2] x [-h1/2, h1/2] x [-h2/2, h2/2]`.
///
/// Splits the cell into six pyramids with apex at the origin, each contributing
/// `(d/2) * integral over its face of 1/|p|`.
pub fn coulomb_cell_average(h: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for a in 0..3 {
        let d = 0.5 * h[a];
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let (hb, hc) = (0.5 * h[b], 0.5 * h[c]);
        let face = integrate(
            |y| integrate(|z| 1.0 / (d * d + y * y + z * z).sqrt(), 0.0, hc, 24, 4),
            0.0,
            hb,
            24,
            4,
        );
        // two opposite faces, each covered by four symmetric quadrants
        total += 2.0 * (0.5 * d) * 4.0 * face;
    }
    total / (h[0] * h[1] * h[2])
}

/// Hartree potential of the density on the grid: `coupling * sum_j K(x_i - x_j) rho_j dV`.
#[derive(Debug, Clone)]
pub struct Hartree {
    domain: BoxDomain,
    kernel: HartreeKernel,
    coupling: f64,
    conv: Arc<Convolver>,
}

impl Hartree {
    pub fn new(domain: &BoxDomain, kernel: HartreeKernel, coupling: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(Error::InvalidConfig(format!("hartree coupling must be non-negative, got {coupling}")));
        }
        match kernel {
            HartreeKernel::Coulomb if domain.dim() != 3 => {
                return Err(Error::InvalidConfig(
                    "the 1/|x| kernel is three-dimensional; use a softened kernel in 1D/2D".into(),
                ))
            }
            HartreeKernel::Softened { a } if !(a > 0.0 && a.is_finite()) => {
                return Err(Error::InvalidConfig("softening length must be positive".into()))
            }
            _ => {}
        }
        let dim = domain.dim();
        let shape = domain.grid_points().to_vec();
        let reach: Vec<usize> = shape.iter().map(|n| n - 1).collect();
        let h: Vec<f64> = (0..dim).map(|a| domain.spacing(a)).collect();
        let vol = domain.cell_volume();
        let singular = match kernel {
            HartreeKernel::Coulomb => coulomb_cell_average([h[0], h[1], h[2]]),
            HartreeKernel::Softened { a } => 1.0 / a,
        };
        let conv = Convolver::new(&shape, &reach, |o| {
            let r2: f64 = o.iter().zip(&h).map(|(&k, hk)| (k as f64 * hk).powi(2)).sum();
            let k = match kernel {
                HartreeKernel::Coulomb if r2 == 0.0 => singular,
                HartreeKernel::Coulomb => 1.0 / r2.sqrt(),
                HartreeKernel::Softened { a } => 1.0 / (r2 + a * a).sqrt(),
            };
            coupling * k * vol
        });
        Ok(Self {
            domain: domain.clone(),
            kernel,
            coupling,
            conv: Arc::new(conv),
        })
    }

    pub fn kernel(&self) -> HartreeKernel {
        self.kernel
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Kernel weight between two grid nodes, including the cell volume and coupling.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (xi, xj) = (self.domain.point(i), self.domain.point(j));
        let r2: f64 = (0..self.domain.dim()).map(|a| (xi[a] - xj[a]).powi(2)).sum();
        let k = match self.kernel {
            HartreeKernel::Coulomb if i == j => {
                let d = &self.domain;
                coulomb_cell_average([d.spacing(0), d.spacing(1), d.spacing(2)])
            }
            HartreeKernel::Coulomb => 1.0 / r2.sqrt(),
            HartreeKernel::Softened { a } => 1.0 / (r2 + a * a).sqrt(),
        };
        self.coupling * k * self.domain.cell_volume()
    }

    pub fn potential_from_density(&self, rho: &[f64]) -> Vec<f64> {
        // kernel and density are non-negative; clamp transform round-off
        self.conv.apply_real(rho).into_iter().map(|v| v.max(0.0)).collect()
    }

    pub fn potential_from_samples(&self, samples: &[Complex64]) -> Vec<f64> {
        let rho: Vec<f64> = samples.iter().map(|z| z.norm_sqr()).collect();
        self.potential_from_density(&rho)
    }
}

/// Hartree potential of `phi` on the domain grid.
pub fn hartree(phi: &SpectralField, op: &Hartree) -> Result<Vec<f64>> {
    if phi.basis().domain() != op.domain() {
        return Err(Error::DomainMismatch("hartree operator built for another grid".into()));
    }
    Ok(op.potential_from_samples(&phi.synthesize()))
}
