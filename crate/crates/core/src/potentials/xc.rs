use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exchange-correlation potential as a function of the local density `rho = |phi|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum XcKind {
    None,
    /// `c * rho / (1 + rho)`
    SaturatingDensity { c: f64 },
    /// Piecewise-linear interpolation of `(density, potential)` pairs;
    /// densities outside the table are an evaluation error.
    Table { density: Vec<f64>, potential: Vec<f64> },
}

/// Declared Lipschitz constants of `phi -> V_xc(phi) phi`.
///
/// `k`, `k_tilde` bound the L2 and H2 quotients on smooth data; `k1`, `k2` the
/// L2 and H1 quotients on rough data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XcConstants {
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub k_tilde: Option<f64>,
    #[serde(default)]
    pub k1: Option<f64>,
    #[serde(default)]
    pub k2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XcModel {
    pub kind: XcKind,
    #[serde(default)]
    pub constants: XcConstants,
}

impl XcModel {
    pub fn none() -> Self {
        Self {
            kind: XcKind::None,
            constants: XcConstants::default(),
        }
    }

    /// Saturating model with the pointwise Lipschitz bound `9c/8` declared for
    /// the L2 quotients (`k`, `k1`).
    pub fn saturating(c: f64) -> Result<Self> {
        let model = Self {
            kind: XcKind::SaturatingDensity { c },
            constants: XcConstants {
                k: Some(9.0 * c.abs() / 8.0),
                k1: Some(9.0 * c.abs() / 8.0),
                ..Default::default()
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            XcKind::None => {}
            XcKind::SaturatingDensity { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidConfig("xc coefficient must be finite".into()));
                }
            }
            XcKind::Table { density, potential } => {
                if density.len() < 2 || density.len() != potential.len() {
                    return Err(Error::InvalidConfig("xc table needs at least two matching rows".into()));
                }
                if density.windows(2).any(|w| !(w[1] > w[0])) || density[0] < 0.0 {
                    return Err(Error::InvalidConfig("xc table densities must increase from >= 0".into()));
                }
                if potential.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig("xc table potentials must be finite".into()));
                }
            }
        }
        for v in [self.constants.k, self.constants.k_tilde, self.constants.k1, self.constants.k2]
            .into_iter()
            .flatten()
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("declared xc constant {v} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, XcKind::None)
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            XcKind::None => "none",
            XcKind::SaturatingDensity { .. } => "saturating-density",
            XcKind::Table { .. } => "table",
        }
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        match &self.kind {
            XcKind::None => Ok(0.0),
            XcKind::SaturatingDensity { c } => Ok(c * rho / (1.0 + rho)),
            XcKind::Table { density, potential } => {
                let last = density.len() - 1;
                if !(rho >= density[0] && rho <= density[last]) {
                    return Err(Error::XcEvaluation(format!(
                        "density {rho} outside table range [{}, {}]",
                        density[0], density[last]
                    )));
                }
                let i = density.partition_point(|&d| d <= rho).clamp(1, last);
                let t = (rho - density[i - 1]) / (density[i] - density[i - 1]);
                Ok(potential[i - 1] + t * (potential[i] - potential[i - 1]))
            }
        }
    }

    pub fn potential(&self, rho: &[f64]) -> Result<Vec<f64>> {
        rho.iter().map(|&r| self.eval(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturating_values() {
        let m = XcModel::saturating(2.0).unwrap();
        assert_eq!(m.eval(0.0).unwrap(), 0.0);
        assert_eq!(m.eval(1.0).unwrap(), 1.0);
        assert_eq!(m.constants.k, Some(2.25));
    }

    #[test]
    fn saturating_pointwise_lipschitz_bound() {
        // |f(z) - f(w)| <= (9c/8)|z - w| for f(z) = c|z|^2 z / (1 + |z|^2)
        let c = 1.0;
        let f = |r: f64| c * r * r * r / (1.0 + r * r);
        let max_slope = (0..4000)
            .map(|i| {
                let r = i as f64 * 1e-3;
                (f(r + 1e-6) - f(r)) / 1e-6
            })
            .fold(0.0, f64::max);
        assert!((max_slope - 9.0 / 8.0).abs() < 1e-5, "{max_slope}");
    }

    #[test]
    fn table_interpolates_and_rejects_out_of_range() {
        let m = XcModel {
            kind: XcKind::Table {
                density: vec![0.0, 1.0, 2.0],
                potential: vec![0.0, -1.0, -1.5],
            },
            constants: XcConstants::default(),
        };
        m.validate().unwrap();
        assert_eq!(m.eval(0.5).unwrap(), -0.5);
        assert_eq!(m.eval(2.0).unwrap(), -1.5);
        assert!(matches!(m.eval(2.5), Err(Error::XcEvaluation(_))));
    }
}
