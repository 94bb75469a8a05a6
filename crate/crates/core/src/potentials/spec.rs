use serde::{Deserialize, Serialize};

use super::control::ControlSignal;
use super::profile::RealProfile;
use crate::error::{Error, Result};
use crate::spectral::BoxDomain;

/// Grid estimates of the potential sup-norms, taken over all control levels.
///
/// `v_1inf = |V|_inf + |grad V|_inf`, `v_2inf = v_1inf + |D^2 V|_inf` with the
/// Frobenius norm of the Hessian; same convention for `w_1inf`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialNorms {
    pub v_inf: f64,
    pub grad_v_inf: f64,
    pub lap_v_inf: f64,
    pub v_1inf: f64,
    pub v_2inf: f64,
    pub w_inf: f64,
    pub w_1inf: f64,
}

/// `V = V0 + Vu u(t)` and the rough part `W = W0 + Wu w(t)`.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    domain: BoxDomain,
    v0: RealProfile,
    vu: RealProfile,
    u: ControlSignal,
    w0: RealProfile,
    wu: RealProfile,
    w: ControlSignal,
    v0_grid: Vec<f64>,
    vu_grid: Vec<f64>,
    w0_grid: Vec<f64>,
    wu_grid: Vec<f64>,
    norms: PotentialNorms,
}

type Jet = (f64, [f64; 3], [[f64; 3]; 3]);

fn combined_sup(a: &[Jet], b: &[Jet], levels: &[f64]) -> (f64, f64, f64, f64) {
    let mut out = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut fold = |v: f64, g: [f64; 3], h: [[f64; 3]; 3]| {
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lap = h[0][0] + h[1][1] + h[2][2];
        let frob = h.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        out.0 = out.0.max(v.abs());
        out.1 = out.1.max(gn);
        out.2 = out.2.max(lap.abs());
        out.3 = out.3.max(frob);
    };
    if a.len() == b.len() {
        for &u in levels {
            for (ja, jb) in a.iter().zip(b) {
                let mut g = [0.0; 3];
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    g[i] = ja.1[i] + u * jb.1[i];
                    for k in 0..3 {
                        h[i][k] = ja.2[i][k] + u * jb.2[i][k];
                    }
                }
                fold(ja.0 + u * jb.0, g, h);
            }
        }
    } else {
        // sampled and symbolic parts live on different point sets: triangle inequality
        let sup = |js: &[Jet]| {
            let mut s = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for j in js {
                s.0 = s.0.max(j.0.abs());
                s.1 = s.1.max(j.1.iter().map(|x| x * x).sum::<f64>().sqrt());
                s.2 = s.2.max((j.2[0][0] + j.2[1][1] + j.2[2][2]).abs());
                s.3 = s.3.max(j.2.iter().flatten().map(|x| x * x).sum::<f64>().sqrt());
            }
            s
        };
        let (sa, sb) = (sup(a), sup(b));
        let umax = levels.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        out = (
            sa.0 + umax * sb.0,
            sa.1 + umax * sb.1,
            sa.2 + umax * sb.2,
            sa.3 + umax * sb.3,
        );
    }
    out
}

impl PotentialSpec {
    pub fn new(
        domain: &BoxDomain,
        v0: RealProfile,
        vu: RealProfile,
        u: ControlSignal,
        w0: RealProfile,
        wu: RealProfile,
        w: ControlSignal,
    ) -> Result<Self> {
        for (name, p) in [("V0", &v0), ("Vu", &vu), ("W0", &w0), ("Wu", &wu)] {
            p.validate(domain)
                .map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))?;
        }
        for (name, p) in [("V0", &v0), ("Vu", &vu)] {
            if matches!(p, RealProfile::Tent { .. }) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be twice differentiable; tent profiles are only allowed for W"
                )));
            }
        }
        if (u.horizon() - w.horizon()).abs() > 1e-12 * u.horizon() {
            return Err(Error::InvalidConfig("controls u and w have different horizons".into()));
        }
        let (va, vb) = (v0.derivative_samples(domain), vu.derivative_samples(domain));
        let (v_inf, grad_v_inf, lap_v_inf, hess) = combined_sup(&va, &vb, u.values());
        let (wa, wb) = (w0.derivative_samples(domain), wu.derivative_samples(domain));
        let (w_inf, grad_w_inf, _, _) = combined_sup(&wa, &wb, w.values());
        let norms = PotentialNorms {
            v_inf,
            grad_v_inf,
            lap_v_inf,
            v_1inf: v_inf + grad_v_inf,
            v_2inf: v_inf + grad_v_inf + hess,
            w_inf,
            w_1inf: w_inf + grad_w_inf,
        };
        let finite = [
            norms.v_inf,
            norms.grad_v_inf,
            norms.lap_v_inf,
            norms.v_2inf,
            norms.w_1inf,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("potential norms are not finite".into()));
        }
        Ok(Self {
            domain: domain.clone(),
            v0_grid: v0.sample(domain),
            vu_grid: vu.sample(domain),
            w0_grid: w0.sample(domain),
            wu_grid: wu.sample(domain),
            v0,
            vu,
            u,
            w0,
            wu,
            w,
            norms,
        })
    }

    /// Smooth part only; W is identically zero.
    pub fn smooth(domain: &BoxDomain, v0: RealProfile, vu: RealProfile, u: ControlSignal) -> Result<Self> {
        let w = ControlSignal::zero(u.horizon())?;
        Self::new(domain, v0, vu, u, RealProfile::zero(), RealProfile::zero(), w)
    }

    pub fn free(domain: &BoxDomain, horizon: f64) -> Result<Self> {
        Self::smooth(domain, RealProfile::zero(), RealProfile::zero(), ControlSignal::zero(horizon)?)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.u.horizon()
    }

    pub fn norms(&self) -> &PotentialNorms {
        &self.norms
    }

    pub fn u(&self) -> &ControlSignal {
        &self.u
    }

    pub fn w(&self) -> &ControlSignal {
        &self.w
    }

    pub fn profiles(&self) -> [&RealProfile; 4] {
        [&self.v0, &self.vu, &self.w0, &self.wu]
    }

    pub fn v0_grid(&self) -> &[f64] {
        &self.v0_grid
    }

    pub fn vu_grid(&self) -> &[f64] {
        &self.vu_grid
    }

    pub fn w0_grid(&self) -> &[f64] {
        &self.w0_grid
    }

    pub fn wu_grid(&self) -> &[f64] {
        &self.wu_grid
    }

    pub fn has_rough_part(&self) -> bool {
        self.w0_grid.iter().chain(&self.wu_grid).any(|v| *v != 0.0)
    }

    /// Union of the breakpoints of `u` and `w`, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.u.breakpoints().iter().chain(self.w.breakpoints()).cloned().collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn eval_v(&self, t: f64) -> Result<Vec<f64>> {
        let u = self.u.value(t)?;
        Ok(self.v0_grid.iter().zip(&self.vu_grid).map(|(a, b)| a + u * b).collect())
    }

    pub fn eval_w(&self, t: f64) -> Result<Vec<f64>> {
        let w = self.w.value(t)?;
        Ok(self.w0_grid.iter().zip(&self.wu_grid).map(|(a, b)| a + w * b).collect())
    }
}

/// `V0 + Vu u(t)` on the domain grid.
pub fn eval_v(spec: &PotentialSpec, t: f64) -> Result<Vec<f64>> {
    spec.eval_v(t)
}

/// `W0 + Wu w(t)` on the domain grid.
pub fn eval_w(spec: &PotentialSpec, t: f64) -> Result<Vec<f64>> {
    spec.eval_w(t)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn domain() -> BoxDomain {
        BoxDomain::cube(1, PI, 16).unwrap()
    }

    #[test]
    fn zero_control_returns_v0() {
        let d = domain();
        let v0 = RealProfile::Harmonic {
            strength: 0.5,
            center: None,
        };
        let spec = PotentialSpec::smooth(&d, v0.clone(), RealProfile::Constant { value: 3.0 }, ControlSignal::zero(1.0).unwrap())
            .unwrap();
        assert_eq!(spec.eval_v(0.3).unwrap(), v0.sample(&d));
    }

    #[test]
    fn constant_coupling_times_control() {
        let d = domain();
        let spec = PotentialSpec::smooth(
            &d,
            RealProfile::zero(),
            RealProfile::Constant { value: 1.0 },
            ControlSignal::constant(2.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(spec.eval_v(0.7).unwrap().iter().all(|&v| v == 2.0));
        assert_eq!(spec.norms().v_inf, 2.0);
        assert_eq!(spec.norms().grad_v_inf, 0.0);
        assert!(spec.eval_v(1.5).is_err());
    }

    #[test]
    fn breakpoint_jump() {
        let d = domain();
        let spec = PotentialSpec::smooth(
            &d,
            RealProfile::zero(),
            RealProfile::Constant { value: 1.5 },
            ControlSignal::new(vec![0.0, 0.5], vec![1.0, -1.0], 1.0).unwrap(),
        )
        .unwrap();
        let a = spec.eval_v(0.49).unwrap();
        let b = spec.eval_v(0.51).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x - y == 3.0));
    }

    #[test]
    fn harmonic_norms_on_closed_box() {
        let d = domain();
        let spec = PotentialSpec::smooth(
            &d,
            RealProfile::Harmonic {
                strength: 1.0,
                center: None,
            },
            RealProfile::zero(),
            ControlSignal::zero(1.0).unwrap(),
        )
        .unwrap();
        let n = spec.norms();
        // sup over [0, pi] of (x - pi/2)^2 is attained at the boundary
        assert!((n.v_inf - PI * PI / 4.0).abs() < 1e-12);
        assert!((n.grad_v_inf - PI).abs() < 1e-12);
        assert_eq!(n.lap_v_inf, 2.0);
    }

    #[test]
    fn tent_rejected_for_smooth_part() {
        let d = domain();
        let tent = RealProfile::Tent {
            height: 1.0,
            radius: 0.5,
            center: None,
        };
        assert!(PotentialSpec::smooth(&d, tent.clone(), RealProfile::zero(), ControlSignal::zero(1.0).unwrap()).is_err());
        let spec = PotentialSpec::new(
            &d,
            RealProfile::zero(),
            RealProfile::zero(),
            ControlSignal::zero(1.0).unwrap(),
            tent,
            RealProfile::zero(),
            ControlSignal::zero(1.0).unwrap(),
        )
        .unwrap();
        assert!((spec.norms().w_1inf - 3.0).abs() < 1e-12);
    }
}
