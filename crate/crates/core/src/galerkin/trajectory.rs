use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::io::{read_series, write_series, SnapshotHeader};
use crate::spectral::{norms_of, NormReport, SpectralBasis, SpectralField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub integrator: String,
    pub dt: f64,
    pub m: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// Coefficient vectors at strictly increasing times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    basis: Arc<SpectralBasis>,
    times: Vec<f64>,
    states: Vec<DVector<Complex64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(
        basis: Arc<SpectralBasis>,
        times: Vec<f64>,
        states: Vec<DVector<Complex64>>,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidInput("trajectory needs one state per time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("trajectory times must increase strictly".into()));
        }
        if states.iter().any(|s| s.len() != basis.len()) {
            return Err(Error::InvalidInput("trajectory state has the wrong order".into()));
        }
        Ok(Self {
            basis,
            times,
            states,
            meta,
        })
    }

    /// Time-constant path equal to `state` on the given grid.
    pub fn constant(basis: Arc<SpectralBasis>, times: Vec<f64>, state: &DVector<Complex64>) -> Result<Self> {
        let states = vec![state.clone(); times.len()];
        let meta = TrajectoryMeta {
            integrator: "constant".into(),
            dt: 0.0,
            m: basis.len(),
            config_hash: None,
        };
        Self::new(basis, times, states, meta)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<Complex64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn first(&self) -> &DVector<Complex64> {
        &self.states[0]
    }

    pub fn last(&self) -> &DVector<Complex64> {
        self.states.last().unwrap()
    }

    pub fn field(&self, i: usize) -> SpectralField {
        SpectralField::new(self.basis.clone(), self.states[i].clone()).expect("validated on construction")
    }

    pub fn norms(&self) -> Vec<NormReport> {
        self.states.iter().map(|s| norms_of(&self.basis, s)).collect()
    }

    /// Append `next`, whose first time must equal this trajectory's end.
    pub fn extend(&mut self, next: &Trajectory) -> Result<()> {
        if (next.start() - self.end()).abs() > 1e-12 * (1.0 + self.end().abs()) {
            return Err(Error::TimeGridMismatch(format!(
                "cannot join trajectory ending at {} with one starting at {}",
                self.end(),
                next.start()
            )));
        }
        self.times.extend_from_slice(&next.times[1..]);
        self.states.extend_from_slice(&next.states[1..]);
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.states {
            *s *= Complex64::new(factor, 0.0);
        }
    }

    fn check_grid(&self, other: &Trajectory) -> Result<()> {
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
        {
            return Err(Error::TimeGridMismatch("trajectories use different time grids".into()));
        }
        Ok(())
    }

    /// `max_t ||self(t) - other(t)||` in the selected norm.
    pub fn sup_distance<F: Fn(&NormReport) -> f64>(&self, other: &Trajectory, norm: F) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| norm(&norms_of(&self.basis, &(a - b))))
            .fold(0.0, f64::max))
    }

    pub fn sup_norm<F: Fn(&NormReport) -> f64>(&self, norm: F) -> f64 {
        self.states
            .iter()
            .map(|s| norm(&norms_of(&self.basis, s)))
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,re_1,im_1,...,re_m,im_m`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "t")?;
        for j in 1..=self.basis.len() {
            write!(out, ",re_{j},im_{j}")?;
        }
        writeln!(out)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.17e}")?;
            for c in s.iter() {
                write!(out, ",{:.17e},{:.17e}", c.re, c.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = SnapshotHeader::for_domain(self.basis.domain(), self.basis.len());
        write_series(out, &header, &self.times, &self.states)
    }

    /// Read a binary series; the header must describe `basis`.
    pub fn read_binary<R: std::io::Read>(input: &mut R, basis: Arc<SpectralBasis>, meta: TrajectoryMeta) -> Result<Self> {
        let (header, times, states) = read_series(input)?;
        if header != SnapshotHeader::for_domain(basis.domain(), basis.len()) {
            return Err(Error::DomainMismatch("snapshot header does not match the configured basis".into()));
        }
        Self::new(basis, times, states, meta)
    }

    pub fn write_sidecar<W: Write>(&self, out: &mut W) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            #[serde(flatten)]
            meta: &'a TrajectoryMeta,
            lengths: &'a [f64],
            grid_points: &'a [usize],
            samples: usize,
            start: f64,
            end: f64,
        }
        let doc = Sidecar {
            meta: &self.meta,
            lengths: self.basis.domain().lengths(),
            grid_points: self.basis.domain().grid_points(),
            samples: self.len(),
            start: self.start(),
            end: self.end(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}
