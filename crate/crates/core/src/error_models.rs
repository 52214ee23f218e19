//! Seeded generators for bounded gradient errors and proximal errors, and a
//! statistical report that checks a sampled stream against its model.
//!
//! All randomness comes from ChaCha8 streams: a `(seed, stream id)` pair
//! fully determines every draw.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Entries within this fraction of the bound count as extreme events.
const EXTREME_FRACTION: f64 = 0.9;
/// Smallest supported cutoff-to-std ratio for the truncated Gaussian core.
const MIN_CUTOFF_RATIO: f64 = 1e-3;
const MIN_VALIDATION_SAMPLES: usize = 10_000;

/// Stream ids used to split one seed into independent generators.
pub const GRADIENT_STREAM: u64 = 0;
pub const PROX_STREAM: u64 = 1;
pub const PROX_X_STREAM: u64 = 2;

/// A seedable, counter-based random stream owned by one solver run.
#[derive(Debug, Clone)]
pub struct ErrorStream {
    rng: ChaCha8Rng,
}

impl ErrorStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientErrorMode {
    /// Entries bounded by `bound`.
    #[default]
    Absolute,
    /// Entries bounded by `bound · sup ‖∇g(xⁱ)‖∞`; `sigma` scales the same way.
    Relative,
}

/// Additive, zero-mean, bounded gradient error with rare extreme events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientErrorModel {
    /// Per-entry bound `M` (or `δ` in relative mode).
    pub bound: f64,
    /// Per-entry standard deviation.
    pub sigma: f64,
    #[serde(default)]
    pub mode: GradientErrorMode,
    /// Probability that an entry is an extreme event in `[0.9M, M]`.
    #[serde(default)]
    pub extreme_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GradientErrorModel {
    pub fn absolute(bound: f64, sigma: f64, seed: u64) -> Self {
        Self {
            bound,
            sigma,
            mode: GradientErrorMode::Absolute,
            extreme_prob: 0.0,
            seed,
        }
    }

    /// A model that always yields the zero vector.
    pub fn null() -> Self {
        Self::absolute(0.0, 0.0, 0)
    }

    pub fn with_extreme_prob(mut self, q: f64) -> Self {
        self.extreme_prob = q;
        self
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Checks the parameters and solves for the Gaussian core.
    pub fn sampler(&self) -> Result<GradientErrorSampler> {
        let (m, sigma, q) = (self.bound, self.sigma, self.extreme_prob);
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::config(format!("gradient error bound must be >= 0, got {m}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config(format!("gradient error sigma must be >= 0, got {sigma}")));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::config(format!("extreme_prob must lie in [0, 1), got {q}")));
        }
        let var = sigma * sigma;
        // 28σ² ≤ 2M
        if 28.0 * var > 2.0 * m * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "gradient error violates 28·sigma² <= 2·bound (sigma² = {var}, bound = {m})"
            )));
        }
        if m == 0.0 || (var == 0.0 && q == 0.0) {
            return Ok(GradientErrorSampler::zero());
        }
        let cutoff = EXTREME_FRACTION * m;
        let extreme_second_moment = (cutoff * cutoff + cutoff * m + m * m) / 3.0;
        let core_var = (var - q * extreme_second_moment) / (1.0 - q);
        if core_var < 0.0 {
            return Err(Error::config(format!(
                "extreme_prob {q} alone exceeds the target variance {var}"
            )));
        }
        let core = if core_var == 0.0 {
            Core::Zero
        } else {
            let ratio = solve_cutoff_ratio(core_var / (cutoff * cutoff)).ok_or_else(|| {
                Error::config(format!(
                    "variance {var} is too large for entries bounded by {m}"
                ))
            })?;
            let std = cutoff / ratio;
            if ratio >= 1.0 {
                Core::Rejection { std, cutoff }
            } else {
                let normal = Normal::new(0.0, 1.0).expect("standard normal");
                Core::InverseCdf {
                    std,
                    lo: normal.cdf(-ratio),
                    hi: normal.cdf(ratio),
                    normal,
                }
            }
        };
        Ok(GradientErrorSampler {
            core,
            extreme_prob: q,
            cutoff,
            bound: m,
        })
    }

    /// Expected per-entry statistics, scaled by `scale` (1 in absolute mode).
    pub fn expectation(&self, scale: f64) -> StreamExpectation {
        StreamExpectation {
            lower: -self.bound * scale,
            upper: self.bound * scale,
            mean: 0.0,
            variance: self.variance() * scale * scale,
        }
    }
}

/// Variance of a standard Gaussian truncated to `[−c, c]`.
fn truncated_unit_variance(c: f64) -> f64 {
    let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = erf(c / std::f64::consts::SQRT_2);
    1.0 - 2.0 * c * pdf / mass
}

/// Finds `c = cutoff/std` such that the truncated Gaussian has variance
/// `target · cutoff²`. `None` when the target reaches the uniform limit `1/3`.
fn solve_cutoff_ratio(target: f64) -> Option<f64> {
    let var_at = |c: f64| truncated_unit_variance(c) / (c * c);
    let (mut lo, mut hi) = (MIN_CUTOFF_RATIO.ln(), 1e8f64.ln());
    if var_at(lo.exp()) <= target {
        return None;
    }
    // var_at is decreasing in c
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if var_at(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone)]
enum Core {
    Zero,
    Rejection {
        std: f64,
        cutoff: f64,
    },
    InverseCdf {
        std: f64,
        lo: f64,
        hi: f64,
        normal: Normal,
    },
}

/// Validated gradient error generator.
#[derive(Debug, Clone)]
pub struct GradientErrorSampler {
    core: Core,
    extreme_prob: f64,
    cutoff: f64,
    bound: f64,
}

impl GradientErrorSampler {
    fn zero() -> Self {
        Self {
            core: Core::Zero,
            extreme_prob: 0.0,
            cutoff: 0.0,
            bound: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.core, Core::Zero) && self.extreme_prob == 0.0
    }

    fn entry(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.extreme_prob > 0.0 && rng.random::<f64>() < self.extreme_prob {
            let magnitude = rng.random_range(self.cutoff..=self.bound);
            return if rng.random::<bool>() { magnitude } else { -magnitude };
        }
        match &self.core {
            Core::Zero => 0.0,
            Core::Rejection { std, cutoff } => loop {
                let z: f64 = rng.sample::<f64, _>(StandardNormal) * std;
                if z.abs() <= *cutoff {
                    break z;
                }
            },
            Core::InverseCdf { std, lo, hi, normal } => {
                let u = rng.random_range(*lo..*hi);
                (normal.inverse_cdf(u) * std).clamp(-self.cutoff, self.cutoff)
            }
        }
    }

    /// Draws a `dim`-vector whose entries lie in `[−scale·M, scale·M]`.
    pub fn sample(&self, dim: usize, scale: f64, stream: &mut ErrorStream) -> DVector<f64> {
        let rng = stream.rng();
        DVector::from_fn(dim, |_, _| self.entry(rng) * scale)
    }
}

/// Draws one gradient error vector from `model`.
pub fn sample_gradient_error(
    model: &GradientErrorModel,
    dim: usize,
    stream: &mut ErrorStream,
) -> Result<DVector<f64>> {
    if dim == 0 {
        return Err(Error::Domain("gradient error dimension must be >= 1".into()));
    }
    Ok(model.sampler()?.sample(dim, 1.0, stream))
}

/// Nonnegative, bounded, stationary proximal error `ε_h ∈ [0, ε₀]`.
///
/// Draws are `ε₀ · Beta(a, b)` with `(a, b)` matched to the configured mean
/// and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxErrorModel {
    pub eps0: f64,
    pub mean: f64,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ProxErrorModel {
    pub fn new(eps0: f64, mean: f64, sigma: f64, seed: u64) -> Self {
        Self {
            eps0,
            mean,
            sigma,
            seed,
        }
    }

    pub fn null() -> Self {
        Self::new(0.0, 0.0, 0.0, 0)
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn sampler(&self) -> Result<ProxErrorSampler> {
        let (eps0, mean, sigma) = (self.eps0, self.mean, self.sigma);
        if !(eps0.is_finite() && eps0 >= 0.0) {
            return Err(Error::config(format!("eps0 must be >= 0, got {eps0}")));
        }
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::config(format!("prox error mean must be >= 0, got {mean}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config(format!("prox error sigma must be >= 0, got {sigma}")));
        }
        if eps0 == 0.0 {
            if mean != 0.0 || sigma != 0.0 {
                return Err(Error::config("eps0 = 0 forces mean = sigma = 0"));
            }
            return Ok(ProxErrorSampler::Constant(0.0));
        }
        if mean >= eps0 {
            return Err(Error::config(format!("prox error mean {mean} must be < eps0 {eps0}")));
        }
        let var = sigma * sigma;
        if 28.0 * var > 2.0 * eps0 * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "prox error violates 28·sigma² <= 2·eps0 (sigma² = {var}, eps0 = {eps0})"
            )));
        }
        if var == 0.0 {
            return Ok(ProxErrorSampler::Constant(mean));
        }
        let mu = mean / eps0;
        let v = var / (eps0 * eps0);
        let k = mu * (1.0 - mu) / v - 1.0;
        if k.is_nan() || k <= 0.0 || mu == 0.0 {
            return Err(Error::config(format!(
                "no distribution on [0, {eps0}] has mean {mean} and variance {var}"
            )));
        }
        let beta = Beta::new(mu * k, (1.0 - mu) * k)
            .map_err(|e| Error::config(format!("prox error shape: {e}")))?;
        Ok(ProxErrorSampler::Beta { beta, eps0 })
    }

    pub fn expectation(&self) -> StreamExpectation {
        StreamExpectation {
            lower: 0.0,
            upper: self.eps0,
            mean: self.mean,
            variance: self.variance(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProxErrorSampler {
    Constant(f64),
    Beta { beta: Beta<f64>, eps0: f64 },
}

impl ProxErrorSampler {
    pub fn sample(&self, stream: &mut ErrorStream) -> f64 {
        match self {
            ProxErrorSampler::Constant(v) => *v,
            ProxErrorSampler::Beta { beta, eps0 } => {
                (beta.sample(stream.rng()) * eps0).clamp(0.0, *eps0)
            }
        }
    }
}

/// Draws one proximal error `ε_h`. The solver realizes it as a residual of
/// norm `√(2·s·ε_h)` along a direction drawn next from the same stream
/// with [`random_unit_vector`].
pub fn sample_prox_error(model: &ProxErrorModel, stream: &mut ErrorStream) -> Result<f64> {
    Ok(model.sampler()?.sample(stream))
}

/// Uniformly distributed direction on the unit sphere in `ℝ^dim`.
pub fn random_unit_vector(dim: usize, stream: &mut ErrorStream) -> DVector<f64> {
    let rng = stream.rng();
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Support and first two moments a sampled stream should exhibit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamExpectation {
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Statistical checks of a scalar stream (vector streams are flattened in
/// draw order):
///
/// - `bounds`: every sample in `[lower, upper]`,
/// - `mean`: `|x̄ − μ| ≤ 4σ/√N`,
/// - `variance`: sample variance within ±10 % of `σ²`,
/// - `autocorrelation`: `|ρ₁| ≤ 4/√N`, a proxy for conditional mean independence.
pub fn validate_error_stream(samples: &[f64], expect: &StreamExpectation) -> Result<ValidationReport> {
    let n = samples.len();
    if n < MIN_VALIDATION_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_VALIDATION_SAMPLES,
            got: n,
        });
    }
    let nf = n as f64;
    let sqrt_n = nf.sqrt();

    let worst_excess = samples
        .iter()
        .map(|&x| (expect.lower - x).max(x - expect.upper))
        .fold(f64::NEG_INFINITY, f64::max);
    let mean = samples.iter().sum::<f64>() / nf;
    let centered_sq = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    let var = centered_sq / (nf - 1.0);
    let lag1 = samples
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>();
    let rho1 = if centered_sq > 0.0 { lag1 / centered_sq } else { 0.0 };

    let sigma = expect.variance.sqrt();
    let mean_tol = 4.0 * sigma / sqrt_n;
    let var_tol = 0.1 * expect.variance;
    let rho_tol = 4.0 / sqrt_n;
    let checks = vec![
        Check {
            name: "bounds",
            statistic: worst_excess,
            threshold: 0.0,
            passed: worst_excess <= 0.0,
        },
        Check {
            name: "mean",
            statistic: (mean - expect.mean).abs(),
            threshold: mean_tol,
            passed: (mean - expect.mean).abs() <= mean_tol,
        },
        Check {
            name: "variance",
            statistic: (var - expect.variance).abs(),
            threshold: var_tol,
            passed: (var - expect.variance).abs() <= var_tol,
        },
        Check {
            name: "autocorrelation",
            statistic: rho1.abs(),
            threshold: rho_tol,
            passed: rho1.abs() <= rho_tol,
        },
    ];
    Ok(ValidationReport { samples: n, checks })
}

/// Checks `E[εₖᵀxₖ] = 0` empirically: `|mean(εₖᵀxₖ)| ≤ 4·sd/√N` with the
/// sample standard deviation of the products.
pub fn validate_data_independence(errors: &[DVector<f64>], iterates: &[DVector<f64>]) -> Result<Check> {
    let n = errors.len().min(iterates.len());
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let products: Vec<f64> = errors.iter().zip(iterates).map(|(e, x)| e.dot(x)).collect();
    let nf = n as f64;
    let mean = products.iter().sum::<f64>() / nf;
    let var = products.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (nf - 1.0);
    let threshold = 4.0 * var.sqrt() / nf.sqrt();
    Ok(Check {
        name: "data_independence",
        statistic: mean.abs(),
        threshold,
        passed: mean.abs() <= threshold,
    })
}
