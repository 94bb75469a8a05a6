use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::presets;
use crate::error::{Error, Result};
use crate::fixedpoint::{BallPolicy, Mode, NonlinearConstants, SolveOptions};
use crate::galerkin::OdeSystem;
use crate::potentials::{
    ControlSignal, Hartree, HartreeKernel, Nonlinearity, PotentialSpec, RealProfile, XcModel,
};
use crate::spectral::io::read_grid_csv;
use crate::spectral::{BoxDomain, ModeIndex, SpectralBasis, SpectralField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub m: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
}

/// Piecewise-constant control, inline or from a `start,value` CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlConfig {
    Inline { starts: Vec<f64>, values: Vec<f64> },
    File { file: PathBuf },
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig::Inline {
            starts: vec![0.0],
            values: vec![0.0],
        }
    }
}

impl ControlConfig {
    fn build(&self, horizon: f64, base: &Path) -> Result<ControlSignal> {
        match self {
            ControlConfig::Inline { starts, values } => ControlSignal::new(starts.clone(), values.clone(), horizon),
            ControlConfig::File { file } => ControlSignal::from_csv(fs::File::open(base.join(file))?, horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsConfig {
    #[serde(default = "RealProfile::zero")]
    pub v0: RealProfile,
    #[serde(default = "RealProfile::zero")]
    pub vu: RealProfile,
    #[serde(default)]
    pub u: ControlConfig,
    #[serde(default = "RealProfile::zero")]
    pub w0: RealProfile,
    #[serde(default = "RealProfile::zero")]
    pub wu: RealProfile,
    #[serde(default)]
    pub w: ControlConfig,
}

impl Default for PotentialsConfig {
    fn default() -> Self {
        Self {
            v0: RealProfile::zero(),
            vu: RealProfile::zero(),
            u: ControlConfig::default(),
            w0: RealProfile::zero(),
            wu: RealProfile::zero(),
            w: ControlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HartreeConfig {
    pub kernel: HartreeKernel,
    #[serde(default = "one")]
    pub coupling: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConfig {
    #[serde(default)]
    pub hartree: Option<HartreeConfig>,
    #[serde(default = "XcModel::none")]
    pub xc: XcModel,
    /// Exchange-correlation term on rough data; used only with a mollifier.
    #[serde(default = "XcModel::none")]
    pub rough_xc: XcModel,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            hartree: None,
            xc: XcModel::none(),
            rough_xc: XcModel::none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `amplitude * exp(-|x - c|^2 / (2 width^2) + i k.x)`
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        momentum: Option<Vec<f64>>,
    },
    /// `amplitude` times one Dirichlet eigenfunction.
    Eigenmode { index: Vec<usize>, amplitude: f64 },
    /// A real profile sampled on the grid, for example a tent.
    Profile { profile: RealProfile },
    /// `x,...,re,im` rows on the interior grid.
    File { path: PathBuf },
}

impl InitialConfig {
    pub fn samples(&self, domain: &BoxDomain, base: &Path) -> Result<Vec<Complex64>> {
        let d = domain.dim();
        match self {
            InitialConfig::Gaussian {
                amplitude,
                width,
                center,
                momentum,
            } => {
                let c = center.clone().unwrap_or_else(|| domain.center()[..d].to_vec());
                let k = momentum.clone().unwrap_or_else(|| vec![0.0; d]);
                if c.len() != d || k.len() != d {
                    return Err(Error::InvalidConfig("initial: center and momentum need one entry per axis".into()));
                }
                Ok(domain
                    .points()
                    .map(|x| {
                        let r2: f64 = (0..d).map(|i| (x[i] - c[i]).powi(2)).sum();
                        let phase: f64 = (0..d).map(|i| k[i] * x[i]).sum();
                        Complex64::from_polar(amplitude * (-r2 / (2.0 * width * width)).exp(), phase)
                    })
                    .collect())
            }
            InitialConfig::Eigenmode { index, amplitude } => {
                let (_, f) = domain.eigenpair(&ModeIndex::new(index.clone())?)?;
                Ok(domain.points().map(|x| Complex64::new(amplitude * f.eval(&x[..d]), 0.0)).collect())
            }
            InitialConfig::Profile { profile } => {
                profile.validate(domain)?;
                Ok(profile.sample(domain).into_iter().map(|v| Complex64::new(v, 0.0)).collect())
            }
            InitialConfig::File { path } => read_grid_csv(fs::File::open(base.join(path))?, domain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Global ball bound `B` and slope `c` of `B_o,k = min(B, c T^d_k)`.
    #[serde(default = "one")]
    pub ball_b: f64,
    #[serde(default = "one")]
    pub ball_c: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_ratio")]
    pub practical_ratio: f64,
    /// Pairs per Lipschitz probe for `C_b`, `C_c`, `K~`.
    #[serde(default = "default_trials")]
    pub probe_trials: usize,
    /// `L^2` size of the probe fields.
    #[serde(default = "one")]
    pub probe_radius: f64,
    #[serde(default = "yes")]
    pub check_estimates: bool,
}

fn default_mode() -> Mode {
    Mode::Practical
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    60
}
fn default_max_steps() -> usize {
    1_000_000
}
fn default_ratio() -> f64 {
    0.5
}
fn default_trials() -> usize {
    100
}
fn yes() -> bool {
    true
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            ball_b: 1.0,
            ball_c: 1.0,
            max_steps: default_max_steps(),
            practical_ratio: default_ratio(),
            probe_trials: default_trials(),
            probe_radius: 1.0,
            check_estimates: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    pub epsilon: f64,
    /// Random fields per control level for the potential-lemma probes.
    #[serde(default = "default_lemma_trials")]
    pub probe_trials: usize,
}

fn default_lemma_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, out: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_m_ladder")]
    pub m_ladder: Vec<usize>,
    /// Step sizes of the timestep study; the reference uses the last divided by `reference_refine`.
    #[serde(default)]
    pub dt_ladder: Option<Vec<f64>>,
    #[serde(default = "default_refine")]
    pub reference_refine: usize,
    #[serde(default = "default_eps_ladder")]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_lipschitz_trials")]
    pub lipschitz_trials: usize,
}

fn default_m_ladder() -> Vec<usize> {
    vec![4, 8, 16, 32]
}
fn default_refine() -> usize {
    16
}
fn default_eps_ladder() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_lipschitz_trials() -> usize {
    200
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            m_ladder: default_m_ladder(),
            dt_ladder: None,
            reference_refine: default_refine(),
            eps_ladder: default_eps_ladder(),
            lipschitz_trials: default_lipschitz_trials(),
        }
    }
}

/// One run, as read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub discretization: DiscretizationConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub potentials: PotentialsConfig,
    #[serde(default)]
    pub nonlinear: NonlinearConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub fixedpoint: FixedPointConfig,
    #[serde(default)]
    pub regularization: Option<RegularizationConfig>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub study: StudyConfig,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// A file path, or `preset:NAME` for a bundled preset.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(name) = source.strip_prefix("preset:") {
            let text = presets::get(name).ok_or_else(|| Error::InvalidConfig(format!("unknown preset '{name}'")))?;
            return Self::from_toml(text, Path::new("."));
        }
        let path = Path::new(source);
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(1..=3).contains(&d.dim) {
            return Err(field_err("domain.dim", format!("must be 1, 2 or 3, got {}", d.dim)));
        }
        if d.lengths.len() != d.dim || d.grid.len() != d.dim {
            return Err(field_err("domain", "lengths and grid need one entry per axis"));
        }
        for (i, &l) in d.lengths.iter().enumerate() {
            positive(&format!("domain.lengths[{i}]"), l)?;
        }
        if self.discretization.m == 0 {
            return Err(field_err("discretization.m", "must be at least 1"));
        }
        positive("discretization.dt", self.discretization.dt)?;
        positive("time.horizon", self.time.horizon)?;
        let fp = &self.fixedpoint;
        positive("fixedpoint.tol", fp.tol)?;
        positive("fixedpoint.ball_b", fp.ball_b)?;
        positive("fixedpoint.ball_c", fp.ball_c)?;
        positive("fixedpoint.probe_radius", fp.probe_radius)?;
        if !(fp.practical_ratio > 0.0 && fp.practical_ratio < 1.0) {
            return Err(field_err("fixedpoint.practical_ratio", "must lie in (0, 1)"));
        }
        if fp.max_iter == 0 || fp.probe_trials == 0 || fp.max_steps == 0 {
            return Err(field_err("fixedpoint", "max_iter, probe_trials and max_steps must be at least 1"));
        }
        if let Some(r) = &self.regularization {
            positive("regularization.epsilon", r.epsilon)?;
        }
        self.nonlinear
            .xc
            .validate()
            .map_err(|e| field_err("nonlinear.xc", e))?;
        self.nonlinear
            .rough_xc
            .validate()
            .map_err(|e| field_err("nonlinear.rough_xc", e))?;
        if !self.nonlinear.rough_xc.is_none() && self.regularization.is_none() {
            return Err(field_err("nonlinear.rough_xc", "needs a [regularization] section"));
        }
        if self.study.m_ladder.iter().any(|&m| m == 0) || self.study.reference_refine == 0 {
            return Err(field_err("study", "ladder entries and reference_refine must be positive"));
        }
        for (i, &e) in self.study.eps_ladder.iter().enumerate() {
            positive(&format!("study.eps_ladder[{i}]"), e)?;
        }
        if let Some(l) = &self.study.dt_ladder {
            for (i, &dt) in l.iter().enumerate() {
                positive(&format!("study.dt_ladder[{i}]"), dt)?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        BoxDomain::new(self.domain.lengths.clone(), self.domain.grid.clone()).map_err(|e| field_err("domain", e))
    }

    pub fn potentials(&self, domain: &BoxDomain) -> Result<PotentialSpec> {
        let p = &self.potentials;
        let t = self.time.horizon;
        let base = &self.base_dir;
        PotentialSpec::new(
            domain,
            p.v0.clone(),
            p.vu.clone(),
            p.u.build(t, base).map_err(|e| field_err("potentials.u", e))?,
            p.w0.clone(),
            p.wu.clone(),
            p.w.build(t, base).map_err(|e| field_err("potentials.w", e))?,
        )
    }

    pub fn options(&self, nonlinear: NonlinearConstants) -> SolveOptions {
        let fp = &self.fixedpoint;
        let mut opts = SolveOptions::new(fp.mode, self.discretization.dt, nonlinear);
        opts.tol = fp.tol;
        opts.max_iter = fp.max_iter;
        opts.practical_ratio = fp.practical_ratio;
        opts.check_estimates = fp.check_estimates;
        opts.policy = BallPolicy {
            b: fp.ball_b,
            c: fp.ball_c,
            max_steps: fp.max_steps,
        };
        opts
    }

    /// Same configuration with `m` retained modes.
    pub fn with_modes(&self, m: usize) -> Self {
        let mut c = self.clone();
        c.discretization.m = m;
        c
    }
}

/// The configured problem, assembled.
pub struct Built {
    pub domain: BoxDomain,
    pub basis: Arc<SpectralBasis>,
    pub potentials: PotentialSpec,
    pub hartree: Option<Hartree>,
    pub nonlinearity: Nonlinearity,
    pub psi0_samples: Vec<Complex64>,
    pub psi0: SpectralField,
    /// Unregularized system; `None` when the potentials have a rough part.
    pub system: Option<OdeSystem>,
}

pub fn build(cfg: &RunConfig) -> Result<Built> {
    let domain = cfg.domain()?;
    let basis = SpectralBasis::new(domain.clone(), cfg.discretization.m)?;
    let potentials = cfg.potentials(&domain)?;
    let hartree = cfg
        .nonlinear
        .hartree
        .as_ref()
        .map(|h| Hartree::new(&domain, h.kernel, h.coupling))
        .transpose()
        .map_err(|e| field_err("nonlinear.hartree", e))?;
    let nonlinearity = Nonlinearity::new(basis.clone(), hartree.clone(), cfg.nonlinear.xc.clone())?;
    let psi0_samples = cfg
        .initial
        .samples(&domain, &cfg.base_dir)
        .map_err(|e| field_err("initial", e))?;
    let psi0 = SpectralField::project_samples(basis.clone(), &psi0_samples)?;
    let system = if potentials.has_rough_part() {
        if cfg.regularization.is_none() {
            return Err(field_err("potentials.w0", "rough potentials need a [regularization] section"));
        }
        None
    } else {
        Some(OdeSystem::new(basis.clone(), &potentials)?)
    };
    Ok(Built {
        domain,
        basis,
        potentials,
        hartree,
        nonlinearity,
        psi0_samples,
        psi0,
        system,
    })
}
