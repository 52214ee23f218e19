//! Proximal-gradient, accelerated proximal-gradient and weighted-Lagrangian
//! ADMM iterations with optional injected errors. The exact methods are the
//! special case without error models.

pub mod admm;

pub use admm::{ax_wlm_admm, AdmmSpec};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::error_models::{
    random_unit_vector, ErrorStream, GradientErrorMode, GradientErrorModel, GradientErrorSampler,
    ProxErrorModel, ProxErrorSampler, GRADIENT_STREAM, PROX_STREAM,
};
use crate::linalg::inf_norm;
use crate::problem::{CompositeProblem, Reference};
use crate::trace::{IterateRecord, IterateTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    #[default]
    None,
    Fista,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step: f64,
    pub max_iter: usize,
    pub momentum: Momentum,
    pub error_g: Option<GradientErrorModel>,
    pub error_h: Option<ProxErrorModel>,
    /// Proximal error of the x-block in ADMM.
    pub error_x: Option<ProxErrorModel>,
    /// Starting point; zero when absent.
    pub x0: Option<DVector<f64>>,
}

impl SolverConfig {
    pub fn new(step: f64, max_iter: usize) -> Self {
        Self {
            step,
            max_iter,
            momentum: Momentum::None,
            error_g: None,
            error_h: None,
            error_x: None,
            x0: None,
        }
    }

    /// Exact proximal gradient with `s = 1/L` (or `s = 1` when `L = 0`).
    pub fn for_problem(problem: &CompositeProblem, max_iter: usize) -> Self {
        let l = problem.lipschitz();
        Self::new(if l > 0.0 { 1.0 / l } else { 1.0 }, max_iter)
    }

    pub fn with_momentum(mut self, momentum: Momentum) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_errors(mut self, g: Option<GradientErrorModel>, h: Option<ProxErrorModel>) -> Self {
        self.error_g = g;
        self.error_h = h;
        self
    }

    pub fn with_x0(mut self, x0: DVector<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    /// Seed of the first configured error model.
    pub fn seed(&self) -> Option<u64> {
        self.error_g
            .as_ref()
            .map(|m| m.seed)
            .or(self.error_h.as_ref().map(|m| m.seed))
            .or(self.error_x.as_ref().map(|m| m.seed))
    }

    /// `s ≤ 1/L` for absolute gradient errors, `s ≤ 1/(L + δ)` for relative ones.
    pub fn check_step(&self, lipschitz: f64) -> Result<()> {
        let s = self.step;
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::config(format!("stepsize must be > 0, got {s}")));
        }
        let (limit, what) = match &self.error_g {
            Some(m) if m.mode == GradientErrorMode::Relative => (lipschitz + m.bound, "1/(L + delta)"),
            _ => (lipschitz, "1/L"),
        };
        if s * limit > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "stepsize {s} exceeds {what} = {}",
                1.0 / limit
            )));
        }
        Ok(())
    }
}

/// Momentum weights `(α_k, β_k)`.
///
/// `α₀ = 1`, `α_k = (1 + √(1 + 4α_{k−1}²))/2` and `β_k = (α_{k−1} − 1)/α_k`
/// with `β₀ = 0`. The sequence satisfies `α_k² − α_k = α_{k−1}²` and
/// `α_k ≥ (k + 2)/2`.
pub fn momentum_schedule(k: usize) -> (f64, f64) {
    let mut seq = MomentumSequence::new();
    for _ in 0..k {
        seq.advance();
    }
    (seq.alpha, seq.beta)
}

/// Incremental form of [`momentum_schedule`].
#[derive(Debug, Clone, Copy)]
pub struct MomentumSequence {
    k: usize,
    alpha: f64,
    beta: f64,
}

impl MomentumSequence {
    pub fn new() -> Self {
        Self {
            k: 0,
            alpha: 1.0,
            beta: 0.0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn advance(&mut self) {
        let prev = self.alpha;
        self.alpha = 0.5 * (1.0 + (1.0 + 4.0 * prev * prev).sqrt());
        self.beta = (prev - 1.0) / self.alpha;
        self.k += 1;
    }
}

impl Default for MomentumSequence {
    fn default() -> Self {
        Self::new()
    }
}

/// Prepared gradient and prox error generators of one run.
pub(crate) struct Injection {
    grad: Option<(GradientErrorSampler, GradientErrorMode, ErrorStream)>,
    prox: Option<(ProxErrorSampler, ErrorStream)>,
}

impl Injection {
    pub(crate) fn new(g: Option<&GradientErrorModel>, h: Option<&ProxErrorModel>, h_stream: u64) -> Result<Self> {
        let grad = g
            .map(|m| Ok::<_, Error>((m.sampler()?, m.mode, ErrorStream::new(m.seed, GRADIENT_STREAM))))
            .transpose()?;
        let prox = h
            .map(|m| Ok::<_, Error>((m.sampler()?, ErrorStream::new(m.seed, h_stream))))
            .transpose()?;
        Ok(Self { grad, prox })
    }

    /// Adds `ε_g` to `grad` in place and returns `‖ε_g‖∞`.
    fn perturb_gradient(&mut self, grad: &mut DVector<f64>, max_grad: f64) -> f64 {
        match &mut self.grad {
            Some((sampler, mode, stream)) => {
                let scale = match mode {
                    GradientErrorMode::Absolute => 1.0,
                    GradientErrorMode::Relative => max_grad,
                };
                let e = sampler.sample(grad.len(), scale, stream);
                *grad += &e;
                inf_norm(&e)
            }
            None => 0.0,
        }
    }

    /// Draws `ε` and moves `point` to a random point on the boundary of the
    /// ε-suboptimal ball `{r : ½·rᵀ(weight·Λ)r ≤ ε}`. `metric(ω)` returns
    /// `ωᵀ(weight·Λ)ω`. Returns `(ε, ‖r‖₂)`.
    pub(crate) fn perturb_prox(
        &mut self,
        point: &mut DVector<f64>,
        metric: impl Fn(&DVector<f64>) -> f64,
    ) -> (f64, f64) {
        match &mut self.prox {
            Some((sampler, stream)) => {
                let eps = sampler.sample(stream);
                let dir = random_unit_vector(point.len(), stream);
                let r = &dir * (2.0 * eps / metric(&dir)).sqrt();
                *point += &r;
                (eps, r.norm())
            }
            None => (0.0, 0.0),
        }
    }
}

fn record(problem: &CompositeProblem, k: usize, x: &DVector<f64>, grad_err: f64, eps: f64, r: f64) -> IterateRecord {
    let f_value = problem.objective_unchecked(x);
    IterateRecord {
        k,
        f_value,
        suboptimality: problem.reference().map(|r| f_value - r.f_star),
        grad_error_inf_norm: grad_err,
        prox_error_eps: eps,
        prox_residual_norm: r,
        constraint_residual: None,
    }
}

fn run_proximal_gradient(problem: &CompositeProblem, config: &SolverConfig) -> Result<IterateTrace> {
    config.check_step(problem.lipschitz())?;
    let n = problem.dim();
    let x0 = config.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    check_dim("initial point", n, x0.len())?;

    let s = config.step;
    let accelerated = config.momentum == Momentum::Fista;
    let mut inject = Injection::new(config.error_g.as_ref(), config.error_h.as_ref(), PROX_STREAM)?;
    let inv_step = 1.0 / s;

    let mut records = Vec::with_capacity(config.max_iter + 1);
    records.push(record(problem, 0, &x0, 0.0, 0.0, 0.0));
    let mut momentum = MomentumSequence::new();
    let mut max_grad: f64 = 0.0;
    let mut x_prev = x0.clone();
    let mut x = x0;

    for k in 0..config.max_iter {
        let y = if accelerated && k > 0 {
            momentum.advance();
            &x + (&x - &x_prev) * momentum.beta()
        } else {
            x.clone()
        };
        let mut grad = problem.grad_g(&y);
        max_grad = max_grad.max(inf_norm(&grad));
        let grad_err = inject.perturb_gradient(&mut grad, max_grad);
        let forward = y - grad * s;
        let mut next = problem.prox_h(&forward, s);
        let (eps, r_norm) = inject.perturb_prox(&mut next, |d| d.norm_squared() * inv_step);

        x_prev = std::mem::replace(&mut x, next);
        records.push(record(problem, k + 1, &x, grad_err, eps, r_norm));
    }

    Ok(IterateTrace {
        records,
        seed: config.seed(),
        config: config.clone(),
        final_x: x,
        final_z: None,
        max_grad_inf_norm: max_grad,
    })
}

/// Approximate proximal-gradient descent:
/// `x⁺ = prox^{ε_h}_{sh}[x − s(∇g(x) + ε_g)]`.
pub fn ax_pgd(problem: &CompositeProblem, config: &SolverConfig) -> Result<IterateTrace> {
    if config.momentum != Momentum::None {
        return Err(Error::config("ax_pgd runs without momentum; use ax_apgd"));
    }
    run_proximal_gradient(problem, config)
}

/// Approximate accelerated proximal-gradient descent: the gradient and prox
/// steps are taken at `yᵏ = xᵏ + β_k(xᵏ − xᵏ⁻¹)` with `x⁻¹ = x⁰`.
/// With `Momentum::None` every `β_k` is zero and this is [`ax_pgd`].
pub fn ax_apgd(problem: &CompositeProblem, config: &SolverConfig) -> Result<IterateTrace> {
    run_proximal_gradient(problem, config)
}

const REFERENCE_MAX_ITER: usize = 1_000_000;
const REFERENCE_REL_TOL: f64 = 1e-14;
const REFERENCE_PATIENCE: usize = 10;

/// High-accuracy minimizer by exact accelerated proximal gradient with
/// `s = 1/L`, stopped after `10⁶` iterations or once the relative objective
/// change stays below `1e−14` for ten consecutive iterations.
///
/// Momentum is reset whenever the step direction opposes the last move,
/// which keeps the objective sequence nearly monotone near the optimum.
pub fn reference_optimum(problem: &CompositeProblem) -> Result<Reference> {
    let n = problem.dim();
    let l = problem.lipschitz();
    let s = if l > 0.0 { 1.0 / l } else { 1.0 };
    let mut x = DVector::zeros(n);
    let mut x_prev = x.clone();
    let mut f = problem.objective_unchecked(&x);
    let scale = f.abs().max(f64::MIN_POSITIVE);
    let mut best = (f, x.clone());
    let mut momentum = MomentumSequence::new();
    let mut quiet = 0;

    for _ in 0..REFERENCE_MAX_ITER {
        momentum.advance();
        let y = &x + (&x - &x_prev) * momentum.beta();
        let next = problem.prox_h(&(&y - problem.grad_g(&y) * s), s);
        if (&y - &next).dot(&(&next - &x)) > 0.0 {
            momentum = MomentumSequence::new();
        }
        let f_next = problem.objective_unchecked(&next);
        if !f_next.is_finite() {
            return Err(Error::NonFinite("reference optimum objective"));
        }
        let change = (f_next - f).abs();
        x_prev = std::mem::replace(&mut x, next);
        f = f_next;
        if f < best.0 {
            best = (f, x.clone());
        }
        if change <= REFERENCE_REL_TOL * f.abs().max(scale * REFERENCE_REL_TOL) {
            quiet += 1;
            if quiet >= REFERENCE_PATIENCE {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(Reference {
        x_star: best.1,
        f_star: best.0,
    })
}

/// Attaches [`reference_optimum`] to the problem.
pub fn with_reference(problem: CompositeProblem) -> Result<CompositeProblem> {
    let r = reference_optimum(&problem)?;
    problem.with_reference(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Quadratic;
    use crate::prox::ProxFunction;
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(momentum_schedule(0), (1.0, 0.0));
        let (a1, b1) = momentum_schedule(1);
        // α² − α = α₀² = 1
        assert!((a1 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(b1, 0.0);
        let mut seq = MomentumSequence::new();
        for k in 1..=1000 {
            let prev = seq.alpha();
            seq.advance();
            let a = seq.alpha();
            assert!(a > prev);
            assert!(a >= (k as f64 + 2.0) / 2.0);
            assert!((a * a - a - prev * prev).abs() <= 1e-9 * a * a);
        }
        assert!(momentum_schedule(1000).0 >= 501.0);
    }

    #[test]
    fn quadratic_converges_in_one_step() {
        let g = Quadratic::new(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::Zero).unwrap();
        let t = ax_pgd(&p, &SolverConfig::new(1.0, 3).with_x0(v(&[5.0]))).unwrap();
        assert_eq!(t.records[1].f_value, 0.0);
        assert_eq!(t.final_x, v(&[0.0]));
    }

    #[test]
    fn lasso_fixed_point_matches_soft_threshold() {
        // g = ½‖x − (3,0)‖², h = ‖x‖₁ → x★ = (2, 0)
        let g = Quadratic::new(DMatrix::identity(2, 2), v(&[3.0, 0.0]), 4.5).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::L1 { weight: 1.0 }).unwrap();
        let t = ax_pgd(&p, &SolverConfig::new(1.0, 5)).unwrap();
        assert_eq!(t.final_x, v(&[2.0, 0.0]));
        assert!((t.records.last().unwrap().f_value - 2.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_oversized_step_and_momentum_mismatch() {
        let g = Quadratic::new(DMatrix::identity(2, 2) * 4.0, DVector::zeros(2), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::Zero).unwrap();
        assert!(matches!(ax_pgd(&p, &SolverConfig::new(0.3, 1)), Err(Error::Config(_))));
        assert!(ax_pgd(&p, &SolverConfig::new(0.25, 1)).is_ok());
        let fista = SolverConfig::new(0.25, 1).with_momentum(Momentum::Fista);
        assert!(matches!(ax_pgd(&p, &fista), Err(Error::Config(_))));
        let mut rel = SolverConfig::new(0.25, 1);
        rel.error_g = Some(GradientErrorModel { mode: GradientErrorMode::Relative, ..GradientErrorModel::absolute(0.1, 0.01, 0) });
        assert!(matches!(ax_pgd(&p, &rel), Err(Error::Config(_))));
        rel.step = 1.0 / 4.1;
        assert!(ax_pgd(&p, &rel).is_ok());
    }

    #[test]
    fn accelerated_single_step_by_hand() {
        // g = (a/2)(x − b)², h = 0, s = 1/a·0.5 so that steps do not terminate.
        let (a, b) = (2.0, 3.0);
        let g = Quadratic::new(DMatrix::from_element(1, 1, a), v(&[a * b]), 0.5 * a * b * b).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::Zero).unwrap();
        let s = 0.25;
        let cfg = SolverConfig::new(s, 3).with_momentum(Momentum::Fista).with_x0(v(&[1.0]));
        let t = ax_apgd(&p, &cfg).unwrap();
        let step = |y: f64| y - s * a * (y - b);
        let x1 = step(1.0);
        let x2 = step(x1); // β₁ = 0
        let a1 = momentum_schedule(1).0;
        let a2 = momentum_schedule(2).0;
        let beta2 = (a1 - 1.0) / a2;
        let x3 = step(x2 + beta2 * (x2 - x1));
        let f = |x: f64| 0.5 * a * (x - b) * (x - b);
        for (rec, x) in t.records[1..].iter().zip([x1, x2, x3]) {
            assert!((rec.f_value - f(x)).abs() <= 1e-12, "{} vs {}", rec.f_value, f(x));
        }
        assert!((t.final_x[0] - x3).abs() <= 1e-15);
    }

    #[test]
    fn apgd_without_momentum_equals_pgd() {
        let g = Quadratic::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), v(&[1.0, -1.0]), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::L1 { weight: 0.2 }).unwrap();
        let cfg = SolverConfig::for_problem(&p, 50);
        assert_eq!(ax_apgd(&p, &cfg).unwrap().f_values(), ax_pgd(&p, &cfg).unwrap().f_values());
    }

    #[test]
    fn prox_residual_respects_ball_radius() {
        let g = Quadratic::new(DMatrix::identity(3, 3) * 2.0, v(&[1.0, 2.0, 3.0]), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::L1 { weight: 0.5 }).unwrap();
        let eps0 = 0.5;
        let cfg = SolverConfig::for_problem(&p, 300)
            .with_errors(None, Some(ProxErrorModel::new(eps0, 0.1, 0.05, 3)));
        let t = ax_pgd(&p, &cfg).unwrap();
        for r in &t.records[1..] {
            assert!(r.prox_error_eps >= 0.0 && r.prox_error_eps <= eps0);
            assert!(r.prox_residual_norm.powi(2) <= 2.0 * cfg.step * eps0 * (1.0 + 1e-12));
            assert!((r.prox_residual_norm.powi(2) - 2.0 * cfg.step * r.prox_error_eps).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_mode_scales_with_gradient_sup() {
        let g = Quadratic::new(DMatrix::identity(2, 2), v(&[10.0, -10.0]), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::Zero).unwrap();
        let model = GradientErrorModel {
            mode: GradientErrorMode::Relative,
            ..GradientErrorModel::absolute(0.01, 0.002, 4)
        };
        let mut cfg = SolverConfig::new(1.0 / 1.01, 100);
        cfg.error_g = Some(model);
        let t = ax_pgd(&p, &cfg).unwrap();
        assert_eq!(t.max_grad_inf_norm, 10.0);
        assert!(t.records.iter().all(|r| r.grad_error_inf_norm <= 0.01 * 10.0));
        assert!(t.records.iter().any(|r| r.grad_error_inf_norm > 0.01));
    }

    #[test]
    fn reference_of_separable_lasso() {
        let g = Quadratic::new(DMatrix::identity(2, 2), v(&[3.0, 0.5]), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(g, ProxFunction::L1 { weight: 1.0 }).unwrap();
        let r = reference_optimum(&p).unwrap();
        assert!((r.x_star - v(&[2.0, 0.0])).amax() < 1e-12);
    }
}
