use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Zero-padded FFT convolution of grid data with a tabulated kernel.
///
/// Output node `i` is `sum_j kernel(i - j) * input[j]`; the kernel is only
/// consulted for offsets within `reach` per axis and is treated as zero beyond.
pub(crate) struct Convolver {
    shape: Vec<usize>,
    padded: Vec<usize>,
    kernel_hat: Vec<Complex64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("shape", &self.shape)
            .field("padded", &self.padded)
            .finish()
    }
}

impl Convolver {
    pub fn new<K: Fn(&[isize]) -> f64>(shape: &[usize], reach: &[usize], kernel: K) -> Self {
        let dim = shape.len();
        let padded: Vec<usize> = (0..dim).map(|a| shape[a] + reach[a]).collect();
        let total: usize = padded.iter().product();
        let mut table = vec![Complex64::new(0.0, 0.0); total];
        let mut offset = vec![0isize; dim];
        for (flat, slot) in table.iter_mut().enumerate() {
            let mut rem = flat;
            let mut inside = true;
            for a in (0..dim).rev() {
                let k = (rem % padded[a]) as isize;
                rem /= padded[a];
                let o = if k as usize <= reach[a] { k } else { k - padded[a] as isize };
                if o.unsigned_abs() > reach[a] {
                    inside = false;
                }
                offset[a] = o;
            }
            if inside {
                *slot = Complex64::new(kernel(&offset), 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let forward: Vec<_> = padded.iter().map(|&p| planner.plan_fft_forward(p)).collect();
        let inverse: Vec<_> = padded.iter().map(|&p| planner.plan_fft_inverse(p)).collect();
        let mut conv = Self {
            shape: shape.to_vec(),
            padded,
            kernel_hat: Vec::new(),
            forward,
            inverse,
        };
        conv.transform(&mut table, false);
        let scale = 1.0 / total as f64;
        for v in &mut table {
            *v *= scale;
        }
        conv.kernel_hat = table;
        conv
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let dim = self.padded.len();
        for a in 0..dim {
            let plan = if inverse { &self.inverse[a] } else { &self.forward[a] };
            let len = self.padded[a];
            let stride: usize = self.padded[a + 1..].iter().product();
            let outer: usize = self.padded[..a].iter().product();
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * len * stride + s;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn apply(&self, input: &[Complex64]) -> Vec<Complex64> {
        let dim = self.shape.len();
        let total: usize = self.padded.iter().product();
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        let n: usize = self.shape.iter().product();
        debug_assert_eq!(input.len(), n);
        for (flat, v) in input.iter().enumerate() {
            buf[self.padded_index(flat, dim)] = *v;
        }
        self.transform(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, true);
        (0..n).map(|flat| buf[self.padded_index(flat, dim)]).collect()
    }

    pub fn apply_real(&self, input: &[f64]) -> Vec<f64> {
        let c: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply(&c).into_iter().map(|v| v.re).collect()
    }

    fn padded_index(&self, flat: usize, dim: usize) -> usize {
        let mut rem = flat;
        let mut idx = 0;
        let mut stride = 1;
        for a in (0..dim).rev() {
            let k = rem % self.shape[a];
            rem /= self.shape[a];
            idx += k * stride;
            stride *= self.padded[a];
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum_in_2d() {
        let shape = [5usize, 7];
        let reach = [4usize, 6];
        let kernel = |o: &[isize]| 1.0 / (1.0 + (o[0] * o[0] + 2 * o[1] * o[1]) as f64);
        let conv = Convolver::new(&shape, &reach, kernel);
        let input: Vec<f64> = (0..35).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let out = conv.apply_real(&input);
        for i in 0..35 {
            let (ix, iy) = ((i / 7) as isize, (i % 7) as isize);
            let mut direct = 0.0;
            for j in 0..35 {
                let (jx, jy) = ((j / 7) as isize, (j % 7) as isize);
                direct += kernel(&[ix - jx, iy - jy]) * input[j];
            }
            assert!((out[i] - direct).abs() < 1e-12, "{i}: {} vs {direct}", out[i]);
        }
    }

    #[test]
    fn short_kernel_does_not_wrap() {
        let conv = Convolver::new(&[6], &[1], |o| if o[0] == 0 { 0.5 } else { 0.25 });
        let out = conv.apply_real(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let expect = [0.5, 0.25, 0.0, 0.0, 0.25, 0.5];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
