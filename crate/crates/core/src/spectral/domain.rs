use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `(0, L_1) x ... x (0, L_dim)` with a uniform interior grid.
///
/// Grid nodes along axis `i` sit at `x_k = (k + 1) * h_i`, `k = 0..N_i`, with
/// `h_i = L_i / (N_i + 1)`; the boundary nodes are implied zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    dim: usize,
    lengths: Vec<f64>,
    grid_points: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lengths: Vec<f64>, grid_points: Vec<usize>) -> Result<Self> {
        let dim = lengths.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if grid_points.len() != dim {
            return Err(Error::InvalidInput(format!(
                "{} grid sizes given for a {dim}-dimensional box",
                grid_points.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidInput(format!("box length must be positive, got {l}")));
        }
        if let Some(n) = grid_points.iter().find(|n| **n < 4) {
            return Err(Error::InvalidInput(format!("grid needs at least 4 points per axis, got {n}")));
        }
        Ok(Self {
            dim,
            lengths,
            grid_points,
        })
    }

    /// Cube of side `length` with `points` nodes per axis.
    pub fn cube(dim: usize, length: f64, points: usize) -> Result<Self> {
        Self::new(vec![length; dim], vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn grid_points(&self) -> &[usize] {
        &self.grid_points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.grid_points[axis] + 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn num_nodes(&self) -> usize {
        self.grid_points.iter().product()
    }

    /// Coordinates of node `k` along `axis`.
    pub fn node(&self, axis: usize, k: usize) -> f64 {
        (k + 1) as f64 * self.spacing(axis)
    }

    /// Per-axis node indices of a flat (row-major, axis 0 slowest) index.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.dim).rev() {
            let n = self.grid_points[axis];
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Physical coordinates of a flat node index; unused axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.node(axis, idx[axis]);
        }
        x
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.num_nodes()).map(|i| self.point(i))
    }

    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for axis in 0..self.dim {
            c[axis] = 0.5 * self.lengths[axis];
        }
        c
    }

    pub fn eigenvalue(&self, j: &ModeIndex) -> Result<f64> {
        self.check_index(j)?;
        Ok((0..self.dim)
            .map(|a| {
                let k = j.0[a] as f64 * PI / self.lengths[a];
                k * k
            })
            .sum())
    }

    /// Smallest Dirichlet eigenvalue, attained at `j = (1, ..., 1)`.
    pub fn lambda_min(&self) -> f64 {
        self.lengths.iter().map(|l| (PI / l).powi(2)).sum()
    }

    /// Constant with `||u||_{H^2} <= C_Z ||Delta u||` on the sine span of this box.
    pub fn c_z(&self) -> f64 {
        let l = self.lambda_min();
        (1.0 + 1.0 / l + 1.0 / (l * l)).sqrt()
    }

    /// Eigenvalue and an evaluator for the normalized eigenfunction.
    pub fn eigenpair(&self, j: &ModeIndex) -> Result<(f64, Eigenfunction)> {
        let lambda = self.eigenvalue(j)?;
        Ok((
            lambda,
            Eigenfunction {
                index: j.clone(),
                lengths: self.lengths.clone(),
            },
        ))
    }

    pub(crate) fn check_index(&self, j: &ModeIndex) -> Result<()> {
        if j.0.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "mode index {j} has {} components, domain is {}-dimensional",
                j.0.len(),
                self.dim
            )));
        }
        if j.0.iter().any(|&c| c < 1) {
            return Err(Error::InvalidInput(format!("mode index {j} has a component below 1")));
        }
        Ok(())
    }

    /// Require `N_i >= 2 * max_index_i + 2` on every axis.
    pub fn check_resolution(&self, max_index: &[usize]) -> Result<()> {
        for (axis, (&n, &j)) in self.grid_points.iter().zip(max_index).enumerate() {
            let required = 2 * j + 2;
            if n < required {
                return Err(Error::Aliasing {
                    axis,
                    points: n,
                    required,
                    max_index: j,
                });
            }
        }
        Ok(())
    }
}

/// Multi-index `(j_1, ..., j_dim)` of a Dirichlet eigenfunction, all components >= 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex(pub Vec<usize>);

impl ModeIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        if components.is_empty() || components.iter().any(|&c| c < 1) {
            return Err(Error::InvalidInput(format!(
                "mode index components must be >= 1, got {components:?}"
            )));
        }
        Ok(Self(components))
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `prod_i sqrt(2/L_i) sin(j_i pi x_i / L_i)`.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    index: ModeIndex,
    lengths: Vec<f64>,
}

impl Eigenfunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.lengths
            .iter()
            .zip(&self.index.0)
            .zip(x)
            .map(|((&l, &j), &xi)| (2.0 / l).sqrt() * (j as f64 * PI * xi / l).sin())
            .product()
    }

    /// Analytic Laplacian of the eigenfunction at `x`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let dim = self.lengths.len();
        let mut total = 0.0;
        for a in 0..dim {
            let mut term = 1.0;
            for b in 0..dim {
                let l = self.lengths[b];
                let k = self.index.0[b] as f64 * PI / l;
                let s = (2.0 / l).sqrt() * (k * x[b]).sin();
                term *= if a == b { -k * k * s } else { s };
            }
            total += term;
        }
        total
    }

    pub fn index(&self) -> &ModeIndex {
        &self.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_examples() {
        let d = BoxDomain::cube(1, PI, 8).unwrap();
        assert!((d.eigenvalue(&ModeIndex(vec![1])).unwrap() - 1.0).abs() < 1e-14);
        let d3 = BoxDomain::cube(3, PI, 8).unwrap();
        assert!((d3.eigenvalue(&ModeIndex(vec![1, 2, 2])).unwrap() - 9.0).abs() < 1e-13);
        let d2pi = BoxDomain::cube(1, 2.0 * PI, 8).unwrap();
        assert!((d2pi.eigenvalue(&ModeIndex(vec![2])).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_zero_component() {
        let d = BoxDomain::cube(2, 1.0, 8).unwrap();
        assert!(d.eigenvalue(&ModeIndex(vec![0, 1])).is_err());
        assert!(ModeIndex::new(vec![1, 0]).is_err());
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(BoxDomain::new(vec![1.0, -1.0], vec![8, 8]).is_err());
        assert!(BoxDomain::new(vec![1.0], vec![3]).is_err());
        assert!(BoxDomain::new(vec![1.0; 4], vec![8; 4]).is_err());
    }

    #[test]
    fn eigen_relation_holds_pointwise() {
        let d = BoxDomain::new(vec![PI, 2.0, 1.5], vec![8, 8, 8]).unwrap();
        let j = ModeIndex(vec![2, 1, 3]);
        let (lambda, f) = d.eigenpair(&j).unwrap();
        for x in [[0.3, 0.7, 0.2], [1.1, 1.9, 1.0], [2.9, 0.1, 0.75]] {
            let residual = -f.laplacian(&x) - lambda * f.eval(&x);
            assert!(residual.abs() < 1e-10);
        }
        // vanishes on the boundary
        assert!(f.eval(&[0.0, 1.0, 0.5]).abs() < 1e-14);
        assert!(f.eval(&[1.0, 2.0, 0.5]).abs() < 1e-12);
    }

    #[test]
    fn flat_indexing_round_trip() {
        let d = BoxDomain::new(vec![1.0, 2.0, 3.0], vec![4, 5, 6]).unwrap();
        let idx = d.unflatten(4 * 5 * 6 - 1);
        assert_eq!(idx, [3, 4, 5]);
        let idx = d.unflatten(6 + 2);
        assert_eq!(idx, [0, 1, 2]);
    }
}
