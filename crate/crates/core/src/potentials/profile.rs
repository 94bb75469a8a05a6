use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::BoxDomain;

/// A real scalar field on the box: one of the symbolic presets or samples on
/// the domain grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RealProfile {
    /// `value`
    Constant { value: f64 },
    /// `strength * |x - center|^2`; center defaults to the box center.
    Harmonic {
        strength: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `-depth * exp(-|x - center|^2 / (2 width^2))`.
    GaussianWell {
        depth: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `slope * (x_axis - center_axis)`, a uniform field along one axis.
    Linear {
        slope: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `height * max(0, 1 - |x - center| / radius)`: Lipschitz, not C^1.
    Tent {
        height: f64,
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Values at the interior grid nodes, row-major.
    Sampled { values: Vec<f64> },
}

impl RealProfile {
    pub fn zero() -> Self {
        RealProfile::Constant { value: 0.0 }
    }

    pub fn validate(&self, domain: &BoxDomain) -> Result<()> {
        let check_center = |c: &Option<Vec<f64>>| match c {
            Some(c) if c.len() != domain.dim() => Err(Error::InvalidConfig(format!(
                "profile center has {} components for a {}-dimensional box",
                c.len(),
                domain.dim()
            ))),
            _ => Ok(()),
        };
        match self {
            RealProfile::Constant { value } => finite(*value),
            RealProfile::Harmonic { strength, center } => {
                finite(*strength)?;
                check_center(center)
            }
            RealProfile::GaussianWell { depth, width, center } => {
                finite(*depth)?;
                if !(*width > 0.0) {
                    return Err(Error::InvalidConfig("gaussian-well width must be positive".into()));
                }
                check_center(center)
            }
            RealProfile::Linear { slope, axis } => {
                finite(*slope)?;
                if *axis >= domain.dim() {
                    return Err(Error::InvalidConfig(format!("linear profile axis {axis} out of range")));
                }
                Ok(())
            }
            RealProfile::Tent { height, radius, center } => {
                finite(*height)?;
                if !(*radius > 0.0) {
                    return Err(Error::InvalidConfig("tent radius must be positive".into()));
                }
                check_center(center)
            }
            RealProfile::Sampled { values } => {
                if values.len() != domain.num_nodes() {
                    return Err(Error::InvalidConfig(format!(
                        "sampled profile has {} values for {} grid nodes",
                        values.len(),
                        domain.num_nodes()
                    )));
                }
                values.iter().try_for_each(|v| finite(*v))
            }
        }
    }

    fn center(c: &Option<Vec<f64>>, domain: &BoxDomain) -> [f64; 3] {
        match c {
            Some(v) => {
                let mut out = [0.0; 3];
                out[..v.len()].copy_from_slice(v);
                out
            }
            None => domain.center(),
        }
    }

    /// Value, gradient and Hessian at `x` for the symbolic kinds.
    fn jet(&self, domain: &BoxDomain, x: &[f64; 3]) -> Option<(f64, [f64; 3], [[f64; 3]; 3])> {
        let dim = domain.dim();
        let zero3 = [[0.0; 3]; 3];
        Some(match self {
            RealProfile::Constant { value } => (*value, [0.0; 3], zero3),
            RealProfile::Harmonic { strength, center } => {
                let c = Self::center(center, domain);
                let mut r2 = 0.0;
                let mut g = [0.0; 3];
                let mut h = zero3;
                for a in 0..dim {
                    let d = x[a] - c[a];
                    r2 += d * d;
                    g[a] = 2.0 * strength * d;
                    h[a][a] = 2.0 * strength;
                }
                (strength * r2, g, h)
            }
            RealProfile::GaussianWell { depth, width, center } => {
                let c = Self::center(center, domain);
                let s2 = width * width;
                let mut d = [0.0; 3];
                let mut r2 = 0.0;
                for a in 0..dim {
                    d[a] = x[a] - c[a];
                    r2 += d[a] * d[a];
                }
                let v = -depth * (-r2 / (2.0 * s2)).exp();
                let mut g = [0.0; 3];
                let mut h = zero3;
                for a in 0..dim {
                    g[a] = -v * d[a] / s2;
                    for b in 0..dim {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        h[a][b] = v * (d[a] * d[b] / (s2 * s2) - delta / s2);
                    }
                }
                (v, g, h)
            }
            RealProfile::Linear { slope, axis } => {
                let c = domain.center();
                let mut g = [0.0; 3];
                g[*axis] = *slope;
                (slope * (x[*axis] - c[*axis]), g, zero3)
            }
            RealProfile::Tent { height, radius, center } => {
                let c = Self::center(center, domain);
                let mut d = [0.0; 3];
                let mut r2 = 0.0;
                for a in 0..dim {
                    d[a] = x[a] - c[a];
                    r2 += d[a] * d[a];
                }
                let r = r2.sqrt();
                if r >= *radius {
                    (0.0, [0.0; 3], zero3)
                } else {
                    let mut g = [0.0; 3];
                    if r > 0.0 {
                        for a in 0..dim {
                            g[a] = -height / radius * d[a] / r;
                        }
                    }
                    // second derivatives are measures on the kink set; the
                    // smooth part vanishes only in 1D
                    (height * (1.0 - r / radius), g, zero3)
                }
            }
            RealProfile::Sampled { .. } => return None,
        })
    }

    /// Values at the interior grid nodes of `domain`.
    pub fn sample(&self, domain: &BoxDomain) -> Vec<f64> {
        match self {
            RealProfile::Sampled { values } => values.clone(),
            _ => domain
                .points()
                .map(|x| self.jet(domain, &x).map(|j| j.0).unwrap_or(0.0))
                .collect(),
        }
    }

    /// Point evaluation for symbolic kinds.
    pub fn eval(&self, domain: &BoxDomain, x: &[f64; 3]) -> Option<f64> {
        self.jet(domain, x).map(|j| j.0)
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, RealProfile::Tent { .. } | RealProfile::Sampled { .. })
    }

    /// Value, gradient and Hessian samples used for sup-norm estimates.
    ///
    /// Symbolic kinds are evaluated on the closed box at the grid spacing and
    /// at one refinement (half spacing); sampled kinds use central differences
    /// on the interior grid.
    pub(crate) fn derivative_samples(&self, domain: &BoxDomain) -> Vec<(f64, [f64; 3], [[f64; 3]; 3])> {
        let dim = domain.dim();
        match self {
            RealProfile::Sampled { values } => sampled_jets(domain, values),
            _ => {
                let mut out = Vec::new();
                for refine in [1usize, 2] {
                    let counts: Vec<usize> = (0..dim)
                        .map(|a| (domain.grid_points()[a] + 1) * refine + 1)
                        .collect();
                    let total: usize = counts.iter().product();
                    for flat in 0..total {
                        let mut rem = flat;
                        let mut x = [0.0; 3];
                        for a in (0..dim).rev() {
                            let k = rem % counts[a];
                            rem /= counts[a];
                            x[a] = k as f64 * domain.spacing(a) / refine as f64;
                        }
                        if let Some(j) = self.jet(domain, &x) {
                            out.push(j);
                        }
                    }
                }
                out
            }
        }
    }
}

fn finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("non-finite profile parameter {v}")))
    }
}

fn sampled_jets(domain: &BoxDomain, values: &[f64]) -> Vec<(f64, [f64; 3], [[f64; 3]; 3])> {
    let dim = domain.dim();
    let n = domain.grid_points();
    let stride: Vec<usize> = (0..dim).map(|a| n[a + 1..dim].iter().product()).collect();
    // zero Dirichlet extension at the boundary nodes
    let at = |idx: [isize; 3]| -> f64 {
        let mut flat = 0usize;
        for a in 0..dim {
            if idx[a] < 0 || idx[a] >= n[a] as isize {
                return 0.0;
            }
            flat += idx[a] as usize * stride[a];
        }
        values[flat]
    };
    (0..domain.num_nodes())
        .map(|flat| {
            let base = domain.unflatten(flat);
            let base = [base[0] as isize, base[1] as isize, base[2] as isize];
            let v = values[flat];
            let mut g = [0.0; 3];
            let mut h = [[0.0; 3]; 3];
            for a in 0..dim {
                let ha = domain.spacing(a);
                let mut p = base;
                p[a] += 1;
                let mut q = base;
                q[a] -= 1;
                g[a] = (at(p) - at(q)) / (2.0 * ha);
                h[a][a] = (at(p) - 2.0 * v + at(q)) / (ha * ha);
                for b in 0..a {
                    let hb = domain.spacing(b);
                    let mut pp = base;
                    pp[a] += 1;
                    pp[b] += 1;
                    let mut pm = base;
                    pm[a] += 1;
                    pm[b] -= 1;
                    let mut mp = base;
                    mp[a] -= 1;
                    mp[b] += 1;
                    let mut mm = base;
                    mm[a] -= 1;
                    mm[b] -= 1;
                    let d = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * ha * hb);
                    h[a][b] = d;
                    h[b][a] = d;
                }
            }
            (v, g, h)
        })
        .collect()
}
