use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constants::EstimateConstants;
use crate::error::{Error, Result};
use crate::galerkin::Trajectory;
use crate::spectral::{norms_of, NormReport, SpectralField};

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Plain,
    Epsilon,
}

/// One inequality at one sample time. Squared estimates report squared norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub id: String,
    pub t: f64,
    pub observed: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub id: String,
    pub samples: usize,
    /// Largest left side over the samples.
    pub observed: f64,
    pub bound: f64,
    /// `bound + slack - observed`
    pub margin: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub variant: Variant,
    pub horizon: f64,
    /// Surrogate for the `H^-1` bound on the time derivative.
    pub k_minus1: f64,
    /// Surrogate for the `L^2` bound on the time derivative.
    pub k_minus2: f64,
    /// Sup-in-time norms of the datum `G`: `L^2`, `H^1`, `H^2`.
    pub g_norms: [f64; 3],
    pub summary: Vec<EstimateSummary>,
    #[serde(skip)]
    pub rows: Vec<EstimateRow>,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.summary.iter().all(|s| s.pass)
    }

    pub fn failures(&self) -> Vec<&EstimateSummary> {
        self.summary.iter().filter(|s| !s.pass).collect()
    }

    pub fn get(&self, id: &str) -> Option<&EstimateSummary> {
        self.summary.iter().find(|s| s.id == id)
    }

    /// One row per inequality per sample time.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "id,t,observed,bound,slack,pass")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.id, r.t, r.observed, r.bound, r.slack, r.pass
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Datum norms over every stored sample of `g`.
fn datum_norms(g: Option<&Trajectory>) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    if let Some(g) = g {
        for n in g.norms() {
            out[0] = out[0].max(n.l2);
            out[1] = out[1].max(n.h1);
            out[2] = out[2].max(n.h2);
        }
    }
    out
}

/// Every time of `traj` must be a sample time of `g`, and both cover the same interval.
fn check_grids(traj: &Trajectory, g: &Trajectory) -> Result<()> {
    if traj.basis().domain() != g.basis().domain() || traj.basis().len() != g.basis().len() {
        return Err(Error::DomainMismatch("datum and trajectory use different bases".into()));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
    if !close(traj.start(), g.start()) || !close(traj.end(), g.end()) {
        return Err(Error::TimeGridMismatch("datum and trajectory cover different intervals".into()));
    }
    let gt = g.times();
    let mut j = 0;
    for &t in traj.times() {
        while j < gt.len() && gt[j] < t && !close(gt[j], t) {
            j += 1;
        }
        if j == gt.len() || !close(gt[j], t) {
            return Err(Error::TimeGridMismatch(format!("datum has no sample at t = {t}")));
        }
    }
    Ok(())
}

/// Difference quotients at each sample (central inside, one-sided at the
/// ends) and the largest change between consecutive forward quotients, which
/// bounds the quotient error to first order.
fn derivatives(traj: &Trajectory) -> (Vec<DVector<Complex64>>, Vec<DVector<Complex64>>) {
    let (t, s) = (traj.times(), traj.states());
    let n = t.len();
    let fwd: Vec<DVector<Complex64>> = (0..n - 1)
        .map(|i| (&s[i + 1] - &s[i]) / Complex64::new(t[i + 1] - t[i], 0.0))
        .collect();
    let mut quot = Vec::with_capacity(n);
    quot.push(fwd[0].clone());
    for i in 1..n - 1 {
        quot.push((&s[i + 1] - &s[i - 1]) / Complex64::new(t[i + 1] - t[i - 1], 0.0));
    }
    quot.push(fwd[n - 2].clone());
    let jumps = fwd.windows(2).map(|w| &w[1] - &w[0]).collect();
    (quot, jumps)
}

struct Builder {
    rows: Vec<EstimateRow>,
    summary: Vec<EstimateSummary>,
}

impl Builder {
    fn add(&mut self, id: &str, times: &[f64], observed: &[f64], bound: f64, slack: f64) {
        let mut worst = 0.0f64;
        let mut pass = true;
        for (&t, &o) in times.iter().zip(observed) {
            let ok = o <= bound * (1.0 + REL_TOL) + slack;
            pass &= ok;
            worst = worst.max(o);
            self.rows.push(EstimateRow {
                id: id.into(),
                t,
                observed: o,
                bound,
                slack,
                pass: ok,
            });
        }
        self.summary.push(EstimateSummary {
            id: id.into(),
            samples: times.len(),
            observed: worst,
            bound,
            margin: bound + slack - worst,
            slack,
            pass: pass && bound.is_finite(),
        });
    }
}

/// Evaluate the energy estimates along `traj`, a solution of the auxiliary
/// problem with datum `g` (`None` for zero) started from the regularization
/// of `psi0` (from `psi0` itself in the plain variant).
pub fn check_estimates(
    traj: &Trajectory,
    g: Option<&Trajectory>,
    psi0: &SpectralField,
    consts: &EstimateConstants,
    variant: Variant,
) -> Result<EstimateReport> {
    if let Some(g) = g {
        check_grids(traj, g)?;
    }
    let span = traj.end() - traj.start();
    if span > consts.horizon * (1.0 + 1e-12) + 1e-14 {
        return Err(Error::TimeOutOfRange {
            t: traj.end(),
            horizon: traj.start() + consts.horizon,
        });
    }
    let reg = match variant {
        Variant::Plain => None,
        Variant::Epsilon => Some(consts.regularized.ok_or_else(|| {
            Error::InvalidConfig("the regularized estimates need mollifier constants".into())
        })?),
    };

    let basis = traj.basis();
    let t = consts.horizon;
    let p0 = psi0.norms();
    let gn = datum_norms(g);
    let [g0, g1, g2] = gn;

    let (en1, en2, en3, pot_factor) = match reg {
        None => (
            t.exp() * (p0.l2.powi(2) + t * g0 * g0),
            (consts.c_grad * t).exp() * (p0.grad.powi(2) + t * g1 * g1),
            (consts.c1_lap * t).exp()
                * (p0.lap.powi(2) + t * (consts.c2_lap * p0.grad.powi(2) + consts.c3_lap * g2 * g2)),
            consts.norms.v_inf,
        ),
        Some(r) => {
            let l = r.lemma;
            (
                (r.c_hat * t).exp() * ((l.c0 * r.phi1_l1 * p0.l2).powi(2) + t * g0 * g0),
                (r.c_hat_grad * t).exp() * ((l.c1 * r.phi1_l1 * p0.grad).powi(2) + t * g1 * g1),
                (r.c_eps * t).exp() * ((l.c2 * r.grad_phi_l1 * p0.h1).powi(2) + t * g2 * g2),
                r.l2_factor(&consts.norms),
            )
        }
    };
    let k_minus1 = en2.sqrt() + pot_factor * en1.sqrt() + g0;
    let k_minus2 = en3.sqrt() + pot_factor * en1.sqrt() + g2;

    let norms: Vec<NormReport> = traj.norms();
    let times: Vec<f64> = traj.times().to_vec();
    let mut b = Builder {
        rows: Vec::new(),
        summary: Vec::new(),
    };
    let ids: [&str; 5] = match variant {
        Variant::Plain => ["EN_1", "EN_2", "EN_3", "EN_4_pre", "EN_4"],
        Variant::Epsilon => ["EN_1_eps", "EN_2_eps", "EN_3_eps", "EN_4_eps", "EN_5_eps"],
    };
    let sq = |f: fn(&NormReport) -> f64| norms.iter().map(|n| f(n).powi(2)).collect::<Vec<_>>();
    b.add(ids[0], &times, &sq(|n| n.l2), en1, 0.0);
    b.add(ids[1], &times, &sq(|n| n.grad), en2, 0.0);
    b.add(ids[2], &times, &sq(|n| n.lap), en3, 0.0);

    if traj.len() >= 2 {
        let (quot, jumps) = derivatives(traj);
        let qn: Vec<NormReport> = quot.iter().map(|q| norms_of(basis, q)).collect();
        let slack_hm1 = jumps.iter().map(|j| norms_of(basis, j).h_minus1).fold(0.0, f64::max);
        let slack_l2 = jumps.iter().map(|j| j.norm()).fold(0.0, f64::max);
        let obs_hm1: Vec<f64> = qn.iter().map(|n| n.h_minus1).collect();
        let obs_l2: Vec<f64> = qn.iter().map(|n| n.l2).collect();
        b.add(ids[3], &times, &obs_hm1, k_minus1, slack_hm1);
        b.add(ids[4], &times, &obs_l2, k_minus2, slack_l2);
    }

    Ok(EstimateReport {
        variant,
        horizon: t,
        k_minus1,
        k_minus2,
        g_norms: gn,
        summary: b.summary,
        rows: b.rows,
    })
}
