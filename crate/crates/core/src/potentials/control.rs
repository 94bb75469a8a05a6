use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant control `u(t)` on `[0, T]`.
///
/// Segment `i` starts at `starts[i]` (with `starts[0] = 0`) and holds
/// `values[i]` until the next start; the value at a switch time is the new one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    starts: Vec<f64>,
    values: Vec<f64>,
    horizon: f64,
}

impl ControlSignal {
    pub fn new(starts: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!("control horizon must be positive, got {horizon}")));
        }
        if starts.is_empty() || starts.len() != values.len() {
            return Err(Error::InvalidInput("control needs one value per segment start".into()));
        }
        if starts[0] != 0.0 {
            return Err(Error::InvalidInput("first control segment must start at t = 0".into()));
        }
        if starts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("control breakpoints must be strictly increasing".into()));
        }
        if starts.iter().any(|&s| s >= horizon) && starts.len() > 1 {
            return Err(Error::InvalidInput("control breakpoint outside (0, T)".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("control values must be finite".into()));
        }
        Ok(Self {
            starts,
            values,
            horizon,
        })
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![value], horizon)
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::constant(0.0, horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.value_unchecked(t))
    }

    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        let i = self.starts.partition_point(|&s| s <= t);
        self.values[i.saturating_sub(1)]
    }

    /// Interior switch times, i.e. every segment start except `t = 0`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.starts[1..]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Parse `(breakpoint, value)` rows; an optional header line is skipped.
    pub fn from_csv<R: Read>(mut input: R, horizon: f64) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut starts = Vec::new();
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("control line {}: expected 2 columns", n + 1)));
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    starts.push(t);
                    values.push(v);
                }
                _ if n == 0 => continue,
                _ => return Err(Error::Parse(format!("control line {}: not numeric", n + 1))),
            }
        }
        Self::new(starts, values, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_values() {
        let u = ControlSignal::new(vec![0.0, 0.5], vec![1.0, -1.0], 1.0).unwrap();
        assert_eq!(u.value(0.49).unwrap() - u.value(0.51).unwrap(), 2.0);
        assert_eq!(u.value(0.5).unwrap(), -1.0);
        assert_eq!(u.value(0.0).unwrap(), 1.0);
        assert_eq!(u.breakpoints(), &[0.5]);
        assert!(u.value(1.5).is_err());
        assert!(u.value(-0.1).is_err());
    }

    #[test]
    fn rejects_unsorted_breakpoints() {
        assert!(ControlSignal::new(vec![0.0, 0.5, 0.4], vec![1.0, 2.0, 3.0], 1.0).is_err());
        assert!(ControlSignal::new(vec![0.1], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn csv_with_header() {
        let csv = "t,u\n0.0,2.0\n0.25,-1.0\n";
        let u = ControlSignal::from_csv(csv.as_bytes(), 1.0).unwrap();
        assert_eq!(u.value(0.3).unwrap(), -1.0);
        assert_eq!(u.sup_abs(), 2.0);
    }
}
