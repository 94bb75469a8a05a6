use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use super::domain::{BoxDomain, ModeIndex};
use crate::error::{Error, Result};

/// The first `m` Dirichlet eigenfunctions of a box, ordered by increasing
/// eigenvalue with lexicographic tie-break, plus the per-axis sine tables used
/// to move between grid samples and coefficients.
#[derive(Debug)]
pub struct SpectralBasis {
    domain: BoxDomain,
    modes: Vec<ModeIndex>,
    eigenvalues: Vec<f64>,
    /// Squared per-axis wavenumbers `(j_i pi / L_i)^2` of every mode.
    wavenumbers_sq: Vec<[f64; 3]>,
    /// Largest retained index per (padded) axis.
    max_index: [usize; 3],
    /// `tables[a][(j - 1) * n_a + k] = sqrt(2/L_a) sin(j pi x_k / L_a)`.
    tables: Vec<Vec<f64>>,
}

impl SpectralBasis {
    pub fn new(domain: BoxDomain, m: usize) -> Result<Arc<Self>> {
        if m == 0 {
            return Err(Error::InvalidInput("mode count must be at least 1".into()));
        }
        let modes = enumerate_modes(&domain, m);
        let dim = domain.dim();
        let mut max_index = [1usize; 3];
        for j in &modes {
            for a in 0..dim {
                max_index[a] = max_index[a].max(j.0[a]);
            }
        }
        domain.check_resolution(&max_index[..dim])?;

        let eigenvalues = modes
            .iter()
            .map(|j| domain.eigenvalue(j))
            .collect::<Result<Vec<_>>>()?;
        let wavenumbers_sq = modes
            .iter()
            .map(|j| {
                let mut k = [0.0; 3];
                for a in 0..dim {
                    k[a] = (j.0[a] as f64 * PI / domain.lengths()[a]).powi(2);
                }
                k
            })
            .collect();
        let tables = (0..dim)
            .map(|a| {
                let n = domain.grid_points()[a];
                let l = domain.lengths()[a];
                let norm = (2.0 / l).sqrt();
                let mut t = Vec::with_capacity(max_index[a] * n);
                for j in 1..=max_index[a] {
                    for k in 0..n {
                        t.push(norm * (j as f64 * PI * domain.node(a, k) / l).sin());
                    }
                }
                t
            })
            .collect();

        Ok(Arc::new(Self {
            domain,
            modes,
            eigenvalues,
            wavenumbers_sq,
            max_index,
            tables,
        }))
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn wavenumbers_sq(&self) -> &[[f64; 3]] {
        &self.wavenumbers_sq
    }

    /// Position of mode `j` in the enumeration, if retained.
    pub fn position(&self, j: &ModeIndex) -> Option<usize> {
        self.modes.iter().position(|x| x == j)
    }

    /// Equivalence constant with `||u||_{H^2} <= C_Z ||Delta u||` for every
    /// field in the span of the sine basis of this box.
    pub fn c_z(&self) -> f64 {
        self.domain.c_z()
    }

    fn padded_shape(&self) -> [usize; 3] {
        let mut s = [1usize; 3];
        for (a, &n) in self.domain.grid_points().iter().enumerate() {
            s[a] = n;
        }
        s
    }

    fn dense_offset(&self, j: &ModeIndex) -> usize {
        let mut off = 0;
        for a in 0..3 {
            let idx = if a < self.domain.dim() { j.0[a] - 1 } else { 0 };
            off = off * self.max_index[a] + idx;
        }
        off
    }

    /// Coefficients `(f, Psi_j)` of grid samples by discrete sine quadrature.
    pub fn project_grid(&self, samples: &[Complex64]) -> Result<DVector<Complex64>> {
        if samples.len() != self.domain.num_nodes() {
            return Err(Error::InvalidInput(format!(
                "{} samples given for a grid of {} nodes",
                samples.len(),
                self.domain.num_nodes()
            )));
        }
        let mut data = samples.to_vec();
        let mut shape = self.padded_shape();
        for a in 0..self.domain.dim() {
            let n = shape[a];
            let h = self.domain.spacing(a);
            let scaled: Vec<f64> = self.tables[a].iter().map(|s| s * h).collect();
            let (next, next_shape) = apply_axis(&data, shape, a, &scaled, self.max_index[a], n);
            data = next;
            shape = next_shape;
        }
        Ok(DVector::from_iterator(
            self.modes.len(),
            self.modes.iter().map(|j| data[self.dense_offset(j)]),
        ))
    }

    pub fn project_real(&self, samples: &[f64]) -> Result<DVector<Complex64>> {
        let c: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.project_grid(&c)
    }

    /// Grid samples of `sum_j c_j Psi_j`.
    pub fn synthesize(&self, coeffs: &DVector<Complex64>) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.modes.len(), "coefficient length must equal mode count");
        let mut shape = self.max_index;
        let mut data = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
        for (j, c) in self.modes.iter().zip(coeffs.iter()) {
            data[self.dense_offset(j)] = *c;
        }
        for a in 0..self.domain.dim() {
            let n = self.domain.grid_points()[a];
            let jmax = self.max_index[a];
            let mut transposed = vec![0.0; n * jmax];
            for j in 0..jmax {
                for k in 0..n {
                    transposed[k * jmax + j] = self.tables[a][j * n + k];
                }
            }
            let (next, next_shape) = apply_axis(&data, shape, a, &transposed, n, jmax);
            data = next;
            shape = next_shape;
        }
        data
    }
}

/// `out[.., r, ..] = sum_c mat[r * cols + c] * data[.., c, ..]` along `axis`.
fn apply_axis(
    data: &[Complex64],
    shape: [usize; 3],
    axis: usize,
    mat: &[f64],
    rows: usize,
    cols: usize,
) -> (Vec<Complex64>, [usize; 3]) {
    debug_assert_eq!(shape[axis], cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        for r in 0..rows {
            let row = &mat[r * cols..(r + 1) * cols];
            let dst = &mut out[(o * rows + r) * inner..(o * rows + r + 1) * inner];
            for (c, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = &data[(o * cols + c) * inner..(o * cols + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * w;
                }
            }
        }
    }
    let mut new_shape = shape;
    new_shape[axis] = rows;
    (out, new_shape)
}

/// First `m` modes by eigenvalue, lexicographic on ties.
///
/// Every one of the `m` smallest modes has eigenvalue at most that of
/// `(1, .., m, .., 1)` along any axis, which bounds the search.
fn enumerate_modes(domain: &BoxDomain, m: usize) -> Vec<ModeIndex> {
    let dim = domain.dim();
    let ksq: Vec<f64> = domain.lengths().iter().map(|l| (PI / l).powi(2)).collect();
    let base: f64 = ksq.iter().sum();
    let threshold = (0..dim)
        .map(|a| base + ksq[a] * ((m * m) as f64 - 1.0))
        .fold(f64::INFINITY, f64::min)
        * (1.0 + 1e-12);

    let mut found: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut current = vec![1usize; dim];
    collect(&ksq, threshold, 0, 0.0, &mut current, &mut found);

    let scale = found.iter().map(|(l, _)| *l).fold(0.0, f64::max).max(1e-300);
    found.sort_by(|(la, ja), (lb, jb)| {
        let qa = (la / scale * 1e11).round() as i64;
        let qb = (lb / scale * 1e11).round() as i64;
        qa.cmp(&qb).then_with(|| ja.cmp(jb))
    });
    found.truncate(m);
    found.into_iter().map(|(_, j)| ModeIndex(j)).collect()
}

fn collect(
    ksq: &[f64],
    threshold: f64,
    axis: usize,
    partial: f64,
    current: &mut Vec<usize>,
    out: &mut Vec<(f64, Vec<usize>)>,
) {
    let rest: f64 = ksq[axis + 1..].iter().sum();
    let mut j = 1usize;
    loop {
        let val = partial + ksq[axis] * (j * j) as f64;
        if val + rest > threshold {
            break;
        }
        current[axis] = j;
        if axis + 1 == ksq.len() {
            out.push((val, current.clone()));
        } else {
            collect(ksq, threshold, axis + 1, val, current, out);
        }
        j += 1;
    }
}
