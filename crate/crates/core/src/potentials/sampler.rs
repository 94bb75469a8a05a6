use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{norms_of, SpectralBasis};

/// Seeded generator of random spectral coefficient vectors.
///
/// Coefficients are `(a + ib) / (1 + lambda_j)^smoothness` with `a, b` uniform
/// in `[-1, 1]`, rescaled to a random L2 norm in `[0.1, 1] * amplitude`.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    basis: Arc<SpectralBasis>,
    rng: ChaCha8Rng,
    amplitude: f64,
    smoothness: f64,
}

impl FieldSampler {
    pub fn new(basis: Arc<SpectralBasis>, seed: u64, amplitude: f64, smoothness: f64) -> Self {
        Self {
            basis,
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplitude,
            smoothness,
        }
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn raw(&mut self) -> DVector<Complex64> {
        let s = self.smoothness;
        let v: Vec<Complex64> = self
            .basis
            .eigenvalues()
            .iter()
            .map(|&l| {
                let a = self.rng.random_range(-1.0..=1.0);
                let b = self.rng.random_range(-1.0..=1.0);
                Complex64::new(a, b) / (1.0 + l).powf(s)
            })
            .collect();
        DVector::from_vec(v)
    }

    pub fn sample(&mut self) -> DVector<Complex64> {
        let mut c = self.raw();
        let n = c.norm();
        let target = self.amplitude * self.rng.random_range(0.1..=1.0);
        if n > 0.0 {
            c *= Complex64::new(target / n, 0.0);
        }
        c
    }

    /// A sample rescaled so that its `||Delta .||` norm equals `radius`.
    pub fn sample_with_lap_norm(&mut self, radius: f64) -> DVector<Complex64> {
        let mut c = self.raw();
        let lap = norms_of(&self.basis, &c).lap;
        if lap > 0.0 {
            c *= Complex64::new(radius / lap, 0.0);
        }
        c
    }

    /// Independent pairs alternate with close pairs `(phi, phi + delta)`.
    pub fn sample_pair(&mut self) -> (DVector<Complex64>, DVector<Complex64>) {
        let phi = self.sample();
        let lam = if self.rng.random_bool(0.5) {
            self.sample()
        } else {
            let scale = 10f64.powf(self.rng.random_range(-3.0..=-1.0));
            &phi + self.sample() * Complex64::new(scale, 0.0)
        };
        (phi, lam)
    }
}
