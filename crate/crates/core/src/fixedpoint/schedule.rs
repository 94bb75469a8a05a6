use serde::{Deserialize, Serialize};

use super::ball::{contraction_factor, invariance_bound, ContractionInputs};
use crate::error::{Error, Result};

const MIN_LENGTH: f64 = 1e-12;

/// `B_o,k = min(B, c T^d_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPolicy {
    pub b: f64,
    pub c: f64,
    /// Abort after this many subintervals.
    pub max_steps: usize,
}

impl Default for BallPolicy {
    fn default() -> Self {
        Self {
            b: 1.0,
            c: 1.0,
            max_steps: 1_000_000,
        }
    }
}

impl BallPolicy {
    pub fn radius(&self, t_d: f64) -> f64 {
        self.b.min(self.c * t_d)
    }
}

/// One subinterval of the covering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub k: usize,
    pub start: f64,
    /// `a_{k-1}`, floored at 1.
    pub a_prev: f64,
    /// `||Delta psi||^2` at the end of the subinterval, once solved.
    pub a_k: Option<f64>,
    pub b_k: f64,
    /// `b_k / C_1D` before halving.
    pub t_d_rule: f64,
    /// Emitted length after halving and clipping.
    pub t_d: f64,
    pub b_circ: f64,
    pub c_circ: f64,
    pub g: f64,
    pub halvings: usize,
    pub clipped: bool,
    /// Whether the length also satisfies the invariance bound.
    pub invariant: bool,
}

impl ScheduleState {
    pub fn end(&self) -> f64 {
        self.start + self.t_d
    }
}

/// `C_o,k = exp(C_1D T) [B + a (1 + T C_2D)]`.
pub fn ball_radius_k(t: f64, b_circ: f64, a: f64, consts: &ContractionInputs) -> f64 {
    (consts.c1_lap * t).exp() * (b_circ + a * (1.0 + t * consts.c2_lap))
}

fn evaluate(
    k: usize,
    t_d: f64,
    a_prev: f64,
    inputs_for: &dyn Fn(f64) -> Result<ContractionInputs>,
    policy: &BallPolicy,
) -> Result<(f64, f64, f64, bool)> {
    let inputs = inputs_for(t_d)?;
    let b_circ = policy.radius(t_d);
    let c_circ = ball_radius_k(t_d, b_circ, a_prev, &inputs);
    let g = contraction_factor(t_d, &inputs, c_circ);
    let invariant = t_d <= invariance_bound(b_circ, &inputs, c_circ, f64::INFINITY)?;
    if !g.is_finite() {
        return Err(Error::ScheduleUnderflow { k, length: t_d });
    }
    Ok((b_circ, c_circ, g, invariant))
}

/// Plan subinterval `k` starting at `start` with previous `a_{k-1}`.
pub fn plan_step(
    k: usize,
    start: f64,
    horizon: f64,
    a_prev: f64,
    inputs_for: &dyn Fn(f64) -> Result<ContractionInputs>,
    policy: &BallPolicy,
) -> Result<ScheduleState> {
    let a_prev = a_prev.max(1.0);
    let c1 = inputs_for(horizon)?.c1_lap;
    if !(c1 > 0.0) {
        return Err(Error::InvalidInput("C_1D must be positive".into()));
    }
    let b_k = 1.0 / (k as f64 * a_prev.powi(3));
    let t_d_rule = b_k / c1;
    let mut t_d = t_d_rule;
    let mut halvings = 0;
    let (mut b_circ, mut c_circ, mut g, mut invariant) = evaluate(k, t_d, a_prev, inputs_for, policy)?;
    while g >= 1.0 {
        t_d *= 0.5;
        halvings += 1;
        if t_d < MIN_LENGTH {
            return Err(Error::ScheduleUnderflow { k, length: t_d });
        }
        (b_circ, c_circ, g, invariant) = evaluate(k, t_d, a_prev, inputs_for, policy)?;
    }
    let remaining = horizon - start;
    let clipped = t_d >= remaining - MIN_LENGTH * horizon.max(1.0);
    if clipped {
        t_d = remaining;
        (b_circ, c_circ, g, invariant) = evaluate(k, t_d, a_prev, inputs_for, policy)?;
    }
    Ok(ScheduleState {
        k,
        start,
        a_prev,
        a_k: None,
        b_k,
        t_d_rule,
        t_d,
        b_circ,
        c_circ,
        g,
        halvings,
        clipped,
        invariant,
    })
}

/// Cover `[0, horizon]`: plan each subinterval from the rule
/// `b_k = 1 / (k a_{k-1}^3)`, `T^d_k = b_k / C_1D`, halve until `g_k < 1`, and
/// let `advance` solve it and return `a_k = ||Delta psi(end)||^2`.
pub fn covering_schedule<F>(
    horizon: f64,
    a0: f64,
    inputs_for: &dyn Fn(f64) -> Result<ContractionInputs>,
    policy: &BallPolicy,
    mut advance: F,
) -> Result<Vec<ScheduleState>>
where
    F: FnMut(&ScheduleState) -> Result<f64>,
{
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let mut out = Vec::new();
    let mut start = 0.0;
    let mut a = a0;
    let mut k = 1;
    loop {
        if k > policy.max_steps {
            return Err(Error::InvalidConfig(format!(
                "covering schedule needs more than {} subintervals; reached t = {start}",
                policy.max_steps
            )));
        }
        let mut state = plan_step(k, start, horizon, a, inputs_for, policy)?;
        let a_k = advance(&state)?;
        state.a_k = Some(a_k);
        let done = state.clipped;
        start = if done { horizon } else { state.end() };
        a = a_k;
        out.push(state);
        if done {
            return Ok(out);
        }
        k += 1;
    }
}
