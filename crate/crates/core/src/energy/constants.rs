use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{mollifier_norms, MollifierSpec, PotentialNorms, PotentialSpec};
use crate::spectral::BoxDomain;

/// `C_PF = 1 / sqrt(lambda_min)`, sharp on the box.
pub fn poincare_constant(domain: &BoxDomain) -> f64 {
    1.0 / domain.lambda_min().sqrt()
}

/// Constants of the mollifier lemmas: `C0, C1, C2` bound the regularized
/// initial state, `C3, C4, C5` the regularized potential term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for LemmaConstants {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
        }
    }
}

/// Data needed for the regularized constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationInput {
    pub spec: MollifierSpec,
    /// Lipschitz constants of the rough exchange-correlation term.
    pub k1: f64,
    pub k2: f64,
    pub lemma: LemmaConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedConstants {
    pub epsilon: f64,
    /// `||phi_1||_L1`
    pub phi1_l1: f64,
    /// `||grad phi_eps||_L1`
    pub grad_phi_l1: f64,
    pub k1: f64,
    pub k2: f64,
    pub lemma: LemmaConstants,
    pub c_hat: f64,
    pub c_hat_grad: f64,
    pub c_eps: f64,
}

impl RegularizedConstants {
    /// `C3 [|V|_inf + |phi_1| (|W|_inf + K1)]`, the factor in front of `||Phi||`.
    pub fn l2_factor(&self, norms: &PotentialNorms) -> f64 {
        self.lemma.c3 * (norms.v_inf + self.phi1_l1 * (norms.w_inf + self.k1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConstants {
    pub horizon: f64,
    pub c_pf: f64,
    pub c_z: f64,
    pub c_grad: f64,
    pub c1_lap: f64,
    pub c2_lap: f64,
    pub c3_lap: f64,
    pub norms: PotentialNorms,
    pub regularized: Option<RegularizedConstants>,
}

/// Every explicit constant for the potentials of `potentials` over `[0, horizon]`.
pub fn constants(
    potentials: &PotentialSpec,
    horizon: f64,
    domain: &BoxDomain,
    mollifier: Option<&RegularizationInput>,
) -> Result<EstimateConstants> {
    if potentials.domain() != domain {
        return Err(Error::DomainMismatch("potential norms were computed on another grid".into()));
    }
    if potentials.has_rough_part() && mollifier.is_none() {
        return Err(Error::InvalidConfig(
            "a rough potential needs mollifier data for its estimate constants".into(),
        ));
    }
    constants_from_norms(potentials.norms(), horizon, domain, mollifier)
}

pub fn constants_from_norms(
    norms: &PotentialNorms,
    horizon: f64,
    domain: &BoxDomain,
    mollifier: Option<&RegularizationInput>,
) -> Result<EstimateConstants> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be finite and non-negative, got {horizon}")));
    }
    let fields = [
        norms.v_inf,
        norms.grad_v_inf,
        norms.lap_v_inf,
        norms.v_1inf,
        norms.v_2inf,
        norms.w_inf,
        norms.w_1inf,
    ];
    if fields.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidInput("potential norms must be finite and non-negative".into()));
    }
    let t = horizon;
    let c_pf = poincare_constant(domain);
    let c_z = domain.c_z();
    let c_grad = 2.0 * (1.0 + norms.v_inf.powi(2) + c_pf.powi(2) * norms.grad_v_inf.powi(2));
    let c1_lap = 2.0 + 2.0 * norms.v_inf;
    let growth = (8.0 * norms.grad_v_inf.powi(2) + 2.0 * c_pf.powi(2) * norms.lap_v_inf.powi(2)) * (c_grad * t).exp();
    let c2_lap = growth;
    let c3_lap = 1.0 + t * growth;

    let regularized = mollifier.map(|input| {
        let (phi1_l1, grad_phi_l1) = mollifier_norms(&input.spec, domain.dim());
        let l = input.lemma;
        let c_hat = (l.c3 * (norms.v_inf + phi1_l1 * (norms.w_inf + input.k1))).powi(2) + 2.0;
        let c_hat_grad =
            2.0 + (l.c4 * (norms.v_1inf + phi1_l1 * (norms.w_1inf + input.k2))).powi(2) * (1.0 + c_pf * c_pf);
        let c_eps = 2.0 + (l.c5 * (norms.v_2inf + grad_phi_l1 * (norms.w_1inf + input.k2))).powi(2) * c_z * c_z;
        RegularizedConstants {
            epsilon: input.spec.epsilon(),
            phi1_l1,
            grad_phi_l1,
            k1: input.k1,
            k2: input.k2,
            lemma: l,
            c_hat,
            c_hat_grad,
            c_eps,
        }
    });

    Ok(EstimateConstants {
        horizon,
        c_pf,
        c_z,
        c_grad,
        c1_lap,
        c2_lap,
        c3_lap,
        norms: *norms,
        regularized,
    })
}
