use serde::{Deserialize, Serialize};

use crate::energy::EstimateConstants;
use crate::error::{Error, Result};
use crate::potentials::{lipschitz_probe, FieldSampler, Inequality, Nonlinearity};
use crate::spectral::NormReport;

/// Constants of the nonlinearity entering the ball and contraction conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearConstants {
    /// Hartree growth constant `C_b`.
    pub c_b: f64,
    /// Hartree `H^2` Lipschitz constant `C_c`.
    pub c_c: f64,
    /// Exchange-correlation `H^2` Lipschitz constant `K~`.
    pub k_tilde: f64,
    /// Where each value came from.
    pub provenance: Vec<String>,
}

impl NonlinearConstants {
    pub fn zero() -> Self {
        Self {
            c_b: 0.0,
            c_c: 0.0,
            k_tilde: 0.0,
            provenance: vec!["no nonlinearity".into()],
        }
    }

    /// Declared values where the model provides them, otherwise empirical
    /// maxima over `trials` random pairs of size up to `radius` in `L^2`.
    pub fn measure(nl: &Nonlinearity, radius: f64, seed: u64, trials: usize) -> Result<Self> {
        let mut out = Self::zero();
        out.provenance.clear();
        let probe = |ineq: Inequality, salt: u64| -> Result<f64> {
            let mut sampler = FieldSampler::new(nl.basis().clone(), seed ^ salt, radius, 1.0);
            Ok(lipschitz_probe(ineq, nl, &mut sampler, trials, None, 0.0)?.max)
        };
        match nl.hartree() {
            Some(h) if h.coupling() != 0.0 => {
                out.c_b = probe(Inequality::HartreeH2Growth, 0x0b)?;
                out.c_c = probe(Inequality::HartreeH2, 0x0c)?;
                out.provenance.push(format!("C_b, C_c: lipschitz probe, {trials} pairs"));
            }
            _ => out.provenance.push("C_b, C_c: zero (no Hartree term)".into()),
        }
        if nl.xc().is_none() {
            out.provenance.push("K~: zero (no xc term)".into());
        } else if let Some(k) = nl.xc().constants.k_tilde {
            out.k_tilde = k;
            out.provenance.push("K~: declared by the xc model".into());
        } else {
            out.k_tilde = probe(Inequality::XcH2, 0x7e)?;
            out.provenance.push(format!("K~: lipschitz probe, {trials} pairs"));
        }
        Ok(out)
    }
}

/// The scalars used by the ball radius, the invariance bound and the contraction factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionInputs {
    pub c_z: f64,
    pub c1_lap: f64,
    pub c2_lap: f64,
    pub c3_lap: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub k_tilde: f64,
}

impl ContractionInputs {
    pub fn new(consts: &EstimateConstants, nl: &NonlinearConstants) -> Self {
        Self {
            c_z: consts.c_z,
            c1_lap: consts.c1_lap,
            c2_lap: consts.c2_lap,
            c3_lap: consts.c3_lap,
            c_b: nl.c_b,
            c_c: nl.c_c,
            k_tilde: nl.k_tilde,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.c_z,
            self.c1_lap,
            self.c2_lap,
            self.c3_lap,
            self.c_b,
            self.c_c,
            self.k_tilde,
        ];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("contraction constants must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// `C_o = exp(C_1D T) [B + |Delta psi0|^2 + T C_2D |grad psi0|^2]`.
pub fn ball_radius(b_circ: f64, t_ref: f64, psi0: &NormReport, consts: &ContractionInputs) -> f64 {
    (consts.c1_lap * t_ref).exp() * (b_circ + psi0.lap.powi(2) + t_ref * consts.c2_lap * psi0.grad.powi(2))
}

/// Sup-norm bound on `F` over the ball, `C_b C_Z^3 C_o^3 + K~ C_Z C_o`.
pub fn nonlinear_bound(consts: &ContractionInputs, c_circ: f64) -> f64 {
    consts.c_b * consts.c_z.powi(3) * c_circ.powi(3) + consts.k_tilde * consts.c_z * c_circ
}

/// Longest interval (capped at `horizon`) on which the ball is invariant.
pub fn invariance_bound(b_circ: f64, consts: &ContractionInputs, c_circ: f64, horizon: f64) -> Result<f64> {
    consts.validate()?;
    let denom = consts.c3_lap * nonlinear_bound(consts, c_circ).powi(2);
    if denom == 0.0 {
        return Ok(horizon);
    }
    Ok(horizon.min(b_circ / denom))
}

/// `g(T) = C_Z (K~ + 2 C_c C_o) sqrt(exp(C_1D T) T C_3D)`.
pub fn contraction_factor(t_hat: f64, consts: &ContractionInputs, c_circ: f64) -> f64 {
    let c_oo = consts.k_tilde + 2.0 * consts.c_c * c_circ;
    consts.c_z * c_oo * ((consts.c1_lap * t_hat).exp() * t_hat * consts.c3_lap).sqrt()
}
