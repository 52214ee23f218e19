//! Closed-form probabilistic convergence bounds for the approximate
//! solvers, the Bernstein tail they rest on, and deterministic/probabilistic
//! bounds from earlier analyses for comparison.
//!
//! Every bound has an asymptotic form (Bernstein tail in its Gaussian
//! regime, `γ√(k·σ²)` terms) and a non-asymptotic form (exponential regime,
//! range terms divided by 3). The combined bound is their pointwise
//! minimum. Expectations of the error/iterate cross terms are taken as zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::{GradientErrorMode, GradientErrorModel, ProxErrorModel};
use crate::solvers::MomentumSequence;

/// Symbols entering the bounds. Variances are suprema over iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Confidence parameter `γ > 0`.
    pub gamma: f64,
    /// Gradient error scale `δ`.
    pub delta: f64,
    /// Proximal error bound `ε₀`.
    pub eps0: f64,
    /// `E[ε_h]`.
    pub mean_eps_h: f64,
    /// Variance of the proximal error `ε_h`.
    pub var_eps_h: f64,
    /// Variance of the gradient-error summand `ε_gᵀ(x★ − x)`.
    pub var_eps_g: f64,
    /// Variance of the residual summand `(1/s)·rᵀ(x★ − x)`.
    pub var_r: f64,
    pub step: f64,
    pub n: usize,
    /// `‖x★ − x⁰‖₂`.
    pub dist0: f64,
    /// `M_∇g`: 1 for absolute gradient errors, `sup ‖∇g(xⁱ)‖∞` for relative ones.
    pub m_grad: f64,
    /// Probability that an iterate stays within `dist0` of `x★`.
    pub p: f64,
    /// Lipschitz constant, used by the deterministic prior bounds.
    pub lipschitz: f64,
    /// Scalar `D_x` of the earlier probabilistic bound.
    pub d_x: f64,
    /// Scalar `M_u` of the accelerated range terms.
    pub m_u: f64,
    pub admm: Option<AdmmBoundParams>,
}

/// Extra symbols of the ADMM ergodic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmBoundParams {
    /// Bound `ε_{g0}` on the x-block proximal error.
    pub eps_g0: f64,
    pub mean_eps_g: f64,
    pub var_eps_g: f64,
    /// `λ_max(M_xᵀM_x)`.
    pub lambda_max_mx: f64,
    /// `‖x⁰ − x★‖²_{M_x}`.
    pub dist0_x_mx_sq: f64,
    pub dist0_x: f64,
    pub dist0_z: f64,
}

impl BoundParams {
    /// Parameters of an error-free run.
    pub fn noiseless(step: f64, n: usize, dist0: f64, lipschitz: f64) -> Self {
        Self {
            gamma: 1.0,
            delta: 0.0,
            eps0: 0.0,
            mean_eps_h: 0.0,
            var_eps_h: 0.0,
            var_eps_g: 0.0,
            var_r: 0.0,
            step,
            n,
            dist0,
            m_grad: 1.0,
            p: 1.0,
            lipschitz,
            d_x: 1.0,
            m_u: 1.0,
            admm: None,
        }
    }

    /// Derives the symbols from the error models of a run.
    ///
    /// With `u = x★ − x` and `‖u‖ ≤ dist0`, the summand variances are
    /// `Var(ε_gᵀu) ≤ (σ_g·M_∇g)²·dist0²` (relative errors scale with
    /// `M_∇g`) and, for a residual of norm `√(2sε)` in a uniform direction,
    /// `E[((1/s)rᵀu)²] = 2·E[ε]·dist0²/(s·n)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_models(
        gradient: Option<&GradientErrorModel>,
        prox: Option<&ProxErrorModel>,
        gamma: f64,
        step: f64,
        n: usize,
        dist0: f64,
        max_grad_inf_norm: f64,
        lipschitz: f64,
    ) -> Self {
        let mut p = Self::noiseless(step, n, dist0, lipschitz);
        p.gamma = gamma;
        if let Some(g) = gradient {
            p.delta = g.bound;
            p.m_grad = match g.mode {
                GradientErrorMode::Absolute => 1.0,
                GradientErrorMode::Relative => max_grad_inf_norm,
            };
            p.var_eps_g = g.variance() * p.m_grad * p.m_grad * dist0 * dist0;
        }
        if let Some(h) = prox {
            p.eps0 = h.eps0;
            p.mean_eps_h = h.mean;
            p.var_eps_h = h.variance();
            p.var_r = 2.0 * h.mean * dist0 * dist0 / (step * n as f64);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("delta", self.delta),
            ("eps0", self.eps0),
            ("mean_eps_h", self.mean_eps_h),
            ("var_eps_h", self.var_eps_h),
            ("var_eps_g", self.var_eps_g),
            ("var_r", self.var_r),
            ("dist0", self.dist0),
            ("m_grad", self.m_grad),
            ("lipschitz", self.lipschitz),
            ("d_x", self.d_x),
            ("m_u", self.m_u),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("bound parameter {name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::config(format!("step must be > 0, got {}", self.step)));
        }
        if self.n == 0 {
            return Err(Error::config("dimension n must be >= 1"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if self.mean_eps_h > self.eps0 {
            return Err(Error::config(format!(
                "mean_eps_h {} exceeds eps0 {}",
                self.mean_eps_h, self.eps0
            )));
        }
        if let Some(a) = &self.admm {
            for (name, v) in [
                ("eps_g0", a.eps_g0),
                ("mean_eps_g", a.mean_eps_g),
                ("var_eps_g", a.var_eps_g),
                ("lambda_max_mx", a.lambda_max_mx),
                ("dist0_x_mx_sq", a.dist0_x_mx_sq),
                ("dist0_x", a.dist0_x),
                ("dist0_z", a.dist0_z),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(format!("admm bound parameter {name} must be finite and >= 0, got {v}")));
                }
            }
            if a.mean_eps_g > a.eps_g0 {
                return Err(Error::config("admm mean_eps_g exceeds eps_g0"));
            }
        }
        Ok(())
    }

    fn initial_term(&self) -> f64 {
        self.dist0 * self.dist0 / (2.0 * self.step)
    }

    /// Range of the gradient-error summand, `√n·δ·M_∇g·dist0`.
    fn grad_range(&self) -> f64 {
        (self.n as f64).sqrt() * self.delta * self.m_grad * self.dist0
    }

    /// Range of the residual summand, `√(2ε₀/s)·dist0`.
    fn residual_range(&self) -> f64 {
        (2.0 * self.eps0 / self.step).sqrt() * self.dist0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValues {
    pub asymptotic: f64,
    pub nonasymptotic: f64,
    pub combined: f64,
}

impl BoundValues {
    fn new(asymptotic: f64, nonasymptotic: f64) -> Self {
        Self {
            asymptotic,
            nonasymptotic,
            combined: asymptotic.min(nonasymptotic),
        }
    }
}

/// Iteration counts delimiting where each error term's closed form is
/// justified: the asymptotic form needs `k ≫` its threshold, the
/// non-asymptotic form `k ≪` its threshold. Infinite when the matching
/// variance is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub asymptotic_eps_h: f64,
    pub asymptotic_eps_g: f64,
    pub asymptotic_r: f64,
    pub nonasymptotic_eps_h: f64,
    pub nonasymptotic_eps_g: f64,
    pub nonasymptotic_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBounds {
    pub values: BoundValues,
    pub thresholds: RegimeThresholds,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn check_k(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("bounds are defined for k >= 1".into()));
    }
    Ok(k as f64)
}

/// Bounds on `f(x^{k+1}) − f★` for approximate proximal-gradient descent.
pub fn axpgd_bounds(k: usize, params: &BoundParams) -> Result<RegimeBounds> {
    let kf = check_k(k)?;
    params.validate()?;
    let p = params;
    let g = p.gamma;
    let spread_h = p.eps0 - p.mean_eps_h;

    let asymptotic = (kf * p.mean_eps_h
        + g * (kf * p.var_eps_h).sqrt()
        + g * (kf * p.var_r).sqrt()
        + g * (kf * p.var_eps_g).sqrt()
        + p.initial_term())
        / kf;
    let nonasymptotic = (kf * p.mean_eps_h
        + g * spread_h / 3.0
        + g * p.grad_range() / 3.0
        + g * p.residual_range() / 3.0
        + p.initial_term())
        / kf;

    let nf = p.n as f64;
    let grad_sq = nf * (p.delta * p.m_grad * p.dist0).powi(2);
    let res_sq = 2.0 * p.eps0 * p.dist0 * p.dist0 / p.step;
    let thresholds = RegimeThresholds {
        asymptotic_eps_h: ratio(g * g * spread_h * spread_h, 9.0 * p.var_eps_h),
        asymptotic_eps_g: ratio(g * g * grad_sq, 9.0 * p.var_eps_g),
        asymptotic_r: ratio(g * g * res_sq, 9.0 * p.var_r),
        nonasymptotic_eps_h: ratio(g * spread_h * spread_h, 9.0 * p.var_eps_h),
        nonasymptotic_eps_g: ratio(g * grad_sq, 9.0 * p.var_eps_g),
        nonasymptotic_r: ratio(g * res_sq, 9.0 * p.var_r),
    };
    Ok(RegimeBounds {
        values: BoundValues::new(asymptotic, nonasymptotic),
        thresholds,
    })
}

/// Bounds on `f(x^{k+1}) − f★` for the accelerated method, with
/// `Σα_i² ≤ k(k+1)(2k+1)/6` and `Σα_i ≤ k(k+1)/2`, divided by `α_k²`.
/// Thresholds use `ᾱ = α_k`.
pub fn axapgd_bounds(k: usize, params: &BoundParams) -> Result<RegimeBounds> {
    let kf = check_k(k)?;
    params.validate()?;
    let p = params;
    let g = p.gamma;
    let spread_h = p.eps0 - p.mean_eps_h;
    let mut seq = MomentumSequence::new();
    for _ in 0..k {
        seq.advance();
    }
    let alpha = seq.alpha();
    let alpha_sq = alpha * alpha;
    let sum_sq = kf * (kf + 1.0) * (2.0 * kf + 1.0) / 6.0;
    let sum = kf * (kf + 1.0) / 2.0;

    let asymptotic = (p.mean_eps_h * sum_sq
        + g * (sum_sq * p.var_eps_h).sqrt()
        + g * (sum * p.var_eps_g).sqrt()
        + g * (sum * p.var_r).sqrt()
        + p.initial_term())
        / alpha_sq;
    let nonasymptotic = (p.mean_eps_h * sum_sq
        + g * kf * (kf + 1.0) * (2.0 * kf + 1.0) * spread_h / 18.0
        + g * kf * (kf + 1.0) * p.grad_range() * p.m_u / 6.0
        + g * kf * (kf + 1.0) * p.residual_range() * p.m_u / 6.0
        + p.initial_term())
        / alpha_sq;

    let nf = p.n as f64;
    let grad_sq = nf * (p.delta * p.m_grad * p.dist0).powi(2);
    let res_sq = 2.0 * p.eps0 * p.dist0 * p.dist0 / p.step;
    let a2 = alpha_sq;
    let a4 = a2 * a2;
    let thresholds = RegimeThresholds {
        asymptotic_eps_h: ratio(g * g * a4 * spread_h * spread_h, 9.0 * p.var_eps_h),
        asymptotic_eps_g: ratio(g * g * a2 * grad_sq, 9.0 * p.var_eps_g),
        asymptotic_r: ratio(g * g * a2 * res_sq, 9.0 * p.var_r),
        nonasymptotic_eps_h: ratio(g * a4 * spread_h * spread_h, 9.0 * p.var_eps_h),
        nonasymptotic_eps_g: ratio(g * a2 * grad_sq, 9.0 * p.var_eps_g),
        nonasymptotic_r: ratio(g * a2 * res_sq, 9.0 * p.var_r),
    };
    Ok(RegimeBounds {
        values: BoundValues::new(asymptotic, nonasymptotic),
        thresholds,
    })
}

/// Ergodic bound on `(1/(k+1))·Σ f(xⁱ⁺¹, zⁱ⁺¹) − f★` for the approximate
/// ADMM with `λ_x = λ_z = 1` and fixed weights.
pub fn admm_bounds(k: usize, params: &BoundParams) -> Result<BoundValues> {
    params.validate()?;
    let a = params
        .admm
        .as_ref()
        .ok_or_else(|| Error::config("admm_bounds needs the admm bound parameters"))?;
    let p = params;
    let g = p.gamma;
    let kf = k as f64;
    let k1 = kf + 1.0;
    let initial = 0.5 * (a.dist0_x_mx_sq + a.dist0_z * a.dist0_z) / k1;
    let d_terms = (2.0 * a.lambda_max_mx * a.eps_g0).sqrt() * a.dist0_x + (2.0 * p.eps0).sqrt() * a.dist0_z;

    let asymptotic = initial
        + (kf * a.mean_eps_g
            + g * (kf * a.var_eps_g).sqrt()
            + kf * p.mean_eps_h
            + g * (kf * p.var_eps_h).sqrt()
            + d_terms)
            / k1;
    let nonasymptotic = initial
        + (kf * a.mean_eps_g
            + g * (a.eps_g0 - a.mean_eps_g) / 3.0
            + kf * p.mean_eps_h
            + g * (p.eps0 - p.mean_eps_h) / 3.0
            + d_terms)
            / k1;
    Ok(BoundValues::new(asymptotic, nonasymptotic))
}

/// Earlier bounds used as comparison curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorBound {
    /// Deterministic ergodic bound for inexact proximal gradient.
    SchmidtBasic,
    /// Deterministic bound for inexact accelerated proximal gradient.
    SchmidtAccel,
    /// Earlier probabilistic bound `ε₀ + γ·M_∇g·D_x·√(n/k)·|δ|·dist0 + D_x²·dist0²/(2sk)`.
    HamadoucheBasic,
}

impl FromStr for PriorBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schmidt_basic" => Ok(PriorBound::SchmidtBasic),
            "schmidt_accel" => Ok(PriorBound::SchmidtAccel),
            "hamadouche_basic" => Ok(PriorBound::HamadoucheBasic),
            other => Err(Error::config(format!("unknown prior bound {other:?}"))),
        }
    }
}

impl fmt::Display for PriorBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorBound::SchmidtBasic => "schmidt_basic",
            PriorBound::SchmidtAccel => "schmidt_accel",
            PriorBound::HamadoucheBasic => "hamadouche_basic",
        })
    }
}

/// Evaluates a prior bound. The deterministic bounds use the worst-case
/// per-iteration errors `‖ε_g‖₂ = √n·δ·M_∇g` and `ε_h = ε₀`; the
/// probabilistic one charges the full range `ε₀` for the proximal error.
pub fn prior_bounds(k: usize, params: &BoundParams, which: PriorBound) -> Result<f64> {
    let kf = check_k(k)?;
    params.validate()?;
    let p = params;
    let nf = p.n as f64;
    let per_iter = |l: f64| (nf.sqrt() * p.delta * p.m_grad) / l + (2.0 * p.eps0 / l).sqrt();
    match which {
        PriorBound::SchmidtBasic | PriorBound::SchmidtAccel => {
            let l = p.lipschitz;
            if l <= 0.0 {
                return Err(Error::config("deterministic prior bounds need lipschitz > 0"));
            }
            if which == PriorBound::SchmidtBasic {
                let a_k = kf * per_iter(l);
                let b_k = kf * p.eps0 / l;
                Ok(l / (2.0 * kf) * (p.dist0 + 2.0 * a_k + (2.0 * b_k).sqrt()).powi(2))
            } else {
                let a_k = kf * (kf + 1.0) / 2.0 * per_iter(l);
                let b_k = kf * (kf + 1.0) * (2.0 * kf + 1.0) / 6.0 * p.eps0 / l;
                Ok(2.0 * l / (kf + 1.0).powi(2) * (p.dist0 + 2.0 * a_k + (2.0 * b_k).sqrt()).powi(2))
            }
        }
        PriorBound::HamadoucheBasic => Ok(p.eps0
            + p.gamma * p.m_grad * p.d_x * (nf / kf).sqrt() * p.delta.abs() * p.dist0
            + p.d_x * p.d_x * p.dist0 * p.dist0 / (2.0 * p.step * kf)),
    }
}

/// `min(1, 2·exp(−t²/(2Σσᵢ² + (2/3)Mt)))`.
pub fn bernstein_tail(t: f64, m: f64, sigma_sq_sum: f64) -> f64 {
    let denom = 2.0 * sigma_sq_sum + 2.0 / 3.0 * m * t;
    if t <= 0.0 || denom <= 0.0 {
        return 1.0;
    }
    (2.0 * (-t * t / denom).exp()).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Asymptotic,
    Nonasymptotic,
}

/// Lower bound on the probability that a bound holds:
/// `p^k(1 − 4e^{−γ²/2})` (asymptotic) or `p^k(1 − 4e^{−γ/2})`
/// (non-asymptotic), clamped at zero.
pub fn probability_floor(gamma: f64, p: f64, k: usize, regime: Regime) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::config(format!("p must lie in (0, 1], got {p}")));
    }
    check_k(k)?;
    let exponent = match regime {
        Regime::Asymptotic => gamma * gamma / 2.0,
        Regime::Nonasymptotic => gamma / 2.0,
    };
    let k = i32::try_from(k).map_err(|_| Error::Domain("k too large".into()))?;
    Ok((p.powi(k) * (1.0 - 4.0 * (-exponent).exp())).max(0.0))
}

/// True when the floor is zero for every `p` and `k`, i.e. `γ < √(2 ln 4)`
/// (asymptotic) or `γ < 2 ln 4` (non-asymptotic).
pub fn floor_is_vacuous(gamma: f64, regime: Regime) -> bool {
    let ln4 = 4f64.ln();
    match regime {
        Regime::Asymptotic => gamma < (2.0 * ln4).sqrt(),
        Regime::Nonasymptotic => gamma < 2.0 * ln4,
    }
}
