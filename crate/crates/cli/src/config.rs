//! TOML experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use axprox::builtin::{
    EXAMPLE_LAMBDA_L1, EXAMPLE_NC, EXAMPLE_NP, EXAMPLE_Q_WEIGHT, EXAMPLE_R_WEIGHT, EXAMPLE_SAMPLING_PERIOD,
};
use axprox::{GradientErrorMode, GradientErrorModel, PriorBound, ProxErrorModel, Weight};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub errors: ErrorsSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Output directory, relative to the working directory.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Directory that relative input paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum ProblemConfig {
    /// `½‖Ax − b‖² + λ‖x‖₁` with `A`, `b` in the plain-text matrix format.
    LassoFile { a: PathBuf, b: PathBuf, lambda: f64 },
    MpcSpec(MpcSection),
    /// Seeded random 30×20 LASSO.
    BuiltinTest {
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    /// Directory holding `A.txt`, `B.txt`, `C.txt`, `D.txt`; the shipped
    /// example model when absent.
    pub model_dir: Option<PathBuf>,
    #[serde(default = "default_sampling_period")]
    pub sampling_period: f64,
    #[serde(default = "default_np")]
    pub np: usize,
    #[serde(default = "default_nc")]
    pub nc: usize,
    #[serde(default = "default_q_weight")]
    pub q_weight: Weight,
    #[serde(default = "default_r_weight")]
    pub r_weight: Weight,
    #[serde(default = "default_lambda_l1")]
    pub lambda_l1: f64,
    #[serde(default = "default_setpoint")]
    pub setpoint: Vec<f64>,
    /// Augmented state `[Δx; y]`; zero when absent.
    pub x_current: Option<Vec<f64>>,
}

fn default_sampling_period() -> f64 {
    EXAMPLE_SAMPLING_PERIOD
}
fn default_np() -> usize {
    EXAMPLE_NP
}
fn default_nc() -> usize {
    EXAMPLE_NC
}
fn default_q_weight() -> Weight {
    Weight::Scalar(EXAMPLE_Q_WEIGHT)
}
fn default_r_weight() -> Weight {
    Weight::Scalar(EXAMPLE_R_WEIGHT)
}
fn default_lambda_l1() -> f64 {
    EXAMPLE_LAMBDA_L1
}
fn default_setpoint() -> Vec<f64> {
    vec![0.1, -0.05, 0.2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Axpgd,
    Axapgd,
    Axwlmadmm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub kind: SolverKind,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Defaults to `1/L` (`1/(L + δ)` for relative gradient errors).
    pub step: Option<f64>,
    #[serde(default)]
    pub admm: AdmmSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            kind: SolverKind::default(),
            max_iter: default_max_iter(),
            step: None,
            admm: AdmmSection::default(),
        }
    }
}

fn default_max_iter() -> usize {
    1000
}

/// Consensus splitting `x − z = 0` with `M_x = m_x·I`, `M_z = m_z·I`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmSection {
    #[serde(default = "default_lambda_dual")]
    pub lambda_dual: f64,
    #[serde(default)]
    pub m_x: f64,
    #[serde(default = "default_m_z")]
    pub m_z: f64,
}

impl Default for AdmmSection {
    fn default() -> Self {
        Self {
            lambda_dual: default_lambda_dual(),
            m_x: 0.0,
            m_z: default_m_z(),
        }
    }
}

fn default_lambda_dual() -> f64 {
    0.5
}
fn default_m_z() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorsSection {
    pub gradient: Option<GradientSection>,
    /// Proximal error of `h` (the z-block in ADMM).
    pub prox: Option<ProxSection>,
    /// Proximal error of the ADMM x-block.
    pub prox_x: Option<ProxSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientSection {
    pub bound: f64,
    /// Defaults to the largest value allowed by `28σ² ≤ 2·bound`, capped
    /// at `bound/4` so the truncated law stays realizable.
    pub sigma: Option<f64>,
    #[serde(default)]
    pub mode: GradientErrorMode,
    #[serde(default)]
    pub extreme_prob: f64,
}

impl GradientSection {
    pub fn model(&self, seed: u64) -> GradientErrorModel {
        GradientErrorModel {
            bound: self.bound,
            sigma: self.sigma.unwrap_or_else(|| (self.bound / 14.0).sqrt().min(self.bound / 4.0)),
            mode: self.mode,
            extreme_prob: self.extreme_prob,
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxSection {
    pub eps0: f64,
    pub mean: f64,
    /// Defaults to the largest value allowed by `28σ² ≤ 2·eps0`, capped at
    /// half the largest Beta variance `mean·(eps0 − mean)`.
    pub sigma: Option<f64>,
}

impl ProxSection {
    pub fn model(&self, seed: u64) -> ProxErrorModel {
        ProxErrorModel::new(
            self.eps0,
            self.mean,
            self.sigma
                .unwrap_or_else(|| (self.eps0 / 14.0).min(0.5 * self.mean * (self.eps0 - self.mean)).sqrt()),
            seed,
        )
    }
}

/// Bound evaluation settings; `Option` fields override values derived
/// from the problem, error models and run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Comparison curve; chosen by solver when absent (none for ADMM).
    pub prior: Option<PriorBound>,
    pub d_x: Option<f64>,
    pub m_u: Option<f64>,
    pub delta: Option<f64>,
    pub eps0: Option<f64>,
    pub mean_eps_h: Option<f64>,
    pub var_eps_h: Option<f64>,
    pub var_eps_g: Option<f64>,
    pub var_r: Option<f64>,
    pub m_grad: Option<f64>,
    pub dist0: Option<f64>,
    pub lipschitz: Option<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            p: default_p(),
            prior: None,
            d_x: None,
            m_u: None,
            delta: None,
            eps0: None,
            mean_eps_h: None,
            var_eps_h: None,
            var_eps_g: None,
            var_r: None,
            m_grad: None,
            dist0: None,
            lipschitz: None,
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}
fn default_p() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Dimension of each gradient-error draw.
    #[serde(default = "default_validate_dim")]
    pub dim: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            dim: default_validate_dim(),
        }
    }
}

fn default_samples() -> usize {
    100_000
}
fn default_validate_dim() -> usize {
    16
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Resolves a path from the file relative to the file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds: at least one seed is required"));
        }
        if self.solver.max_iter == 0 {
            return Err(CliError::config("solver.max_iter: must be >= 1"));
        }
        if let Some(s) = self.solver.step {
            if !(s.is_finite() && s > 0.0) {
                return Err(CliError::config(format!("solver.step: must be > 0, got {s}")));
            }
        }
        if !(self.bounds.gamma.is_finite() && self.bounds.gamma > 0.0) {
            return Err(CliError::config(format!("bounds.gamma: must be > 0, got {}", self.bounds.gamma)));
        }
        if !(self.bounds.p > 0.0 && self.bounds.p <= 1.0) {
            return Err(CliError::config(format!("bounds.p: must lie in (0, 1], got {}", self.bounds.p)));
        }
        if let Some(g) = &self.errors.gradient {
            g.model(0)
                .sampler()
                .map_err(|e| CliError::config(format!("errors.gradient: {e}")))?;
        }
        for (name, section) in [("errors.prox", &self.errors.prox), ("errors.prox_x", &self.errors.prox_x)] {
            if let Some(p) = section {
                p.model(0).sampler().map_err(|e| CliError::config(format!("{name}: {e}")))?;
            }
        }
        if self.errors.prox_x.is_some() && self.solver.kind != SolverKind::Axwlmadmm {
            return Err(CliError::config("errors.prox_x: only used by solver.kind = \"axwlmadmm\""));
        }
        match &self.problem {
            ProblemConfig::LassoFile { a, b, .. } => {
                for p in [a, b] {
                    let full = self.resolve(p);
                    if !full.is_file() {
                        return Err(CliError::config(format!("problem: file {} does not exist", full.display())));
                    }
                }
            }
            ProblemConfig::MpcSpec(m) => {
                if let Some(dir) = &m.model_dir {
                    for f in ["A.txt", "B.txt", "C.txt", "D.txt"] {
                        let full = self.resolve(dir).join(f);
                        if !full.is_file() {
                            return Err(CliError::config(format!(
                                "problem.model_dir: {} does not exist",
                                full.display()
                            )));
                        }
                    }
                }
            }
            ProblemConfig::BuiltinTest { .. } => {}
        }
        Ok(())
    }
}
