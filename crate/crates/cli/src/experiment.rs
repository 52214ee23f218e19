//! Problem loading, seeded solver runs, bound curves and CSV artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use axprox::io::{read_matrix, read_vector, write_matrix, write_vector};
use axprox::mpc::{condense, example_spacecraft, MpcProblem, StateSpace};
use axprox::solvers::reference_optimum;
use axprox::{
    admm_bounds, ax_apgd, ax_pgd, ax_wlm_admm, axapgd_bounds, axpgd_bounds, prior_bounds, probability_floor,
    AdmmBoundParams, AdmmSpec, BoundParams, BoundValues, CompositeProblem, GradientErrorMode, IterateTrace, Momentum,
    MpcSpec, PriorBound, ProxFunction, Quadratic, Reference, Regime, SolverConfig,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, MpcSection, ProblemConfig, SolverKind};
use crate::error::{CliError, Result};
use crate::output::{write_rows, write_summary, CsvRow, SummaryRow};

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Solver trace only.
    Solve,
    /// Solver trace with bound curves.
    Compare,
    /// Bound curves without running a solver.
    Bounds,
}

/// A problem in both the generic composite form and the quadratic form
/// the ADMM solver needs, with its reference optimum.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub g: Quadratic,
    pub h: ProxFunction,
    pub problem: CompositeProblem,
}

impl LoadedProblem {
    pub fn reference(&self) -> &Reference {
        self.problem.reference().expect("loaded problems carry a reference optimum")
    }
}

fn load_state_space(cfg: &ExperimentConfig, m: &MpcSection) -> Result<StateSpace> {
    Ok(match &m.model_dir {
        None => example_spacecraft(m.sampling_period)?,
        Some(dir) => {
            let dir = cfg.resolve(dir);
            let read = |name: &str| read_matrix(dir.join(name));
            StateSpace::new(
                read("A.txt")?,
                read("B.txt")?,
                read("C.txt")?,
                read("D.txt")?,
                m.sampling_period,
            )?
        }
    })
}

pub fn mpc_spec(cfg: &ExperimentConfig, m: &MpcSection) -> Result<MpcSpec> {
    let ss = load_state_space(cfg, m)?;
    let na = ss.states() + ss.outputs();
    let x_current = match &m.x_current {
        Some(v) => DVector::from_vec(v.clone()),
        None => DVector::zeros(na),
    };
    Ok(MpcSpec::with_weights(
        ss,
        m.np,
        m.nc,
        &m.q_weight,
        &m.r_weight,
        m.lambda_l1,
        DVector::from_vec(m.setpoint.clone()),
        x_current,
    )?)
}

pub fn condense_config(cfg: &ExperimentConfig) -> Result<MpcProblem> {
    match &cfg.problem {
        ProblemConfig::MpcSpec(m) => Ok(condense(&mpc_spec(cfg, m)?)?),
        _ => Err(CliError::config("problem.source: mpc-build needs source = \"mpc-spec\"")),
    }
}

pub fn load_problem(cfg: &ExperimentConfig) -> Result<LoadedProblem> {
    let (g, h) = match &cfg.problem {
        ProblemConfig::LassoFile { a, b, lambda } => {
            let a = read_matrix(cfg.resolve(a))?;
            let b = read_vector(cfg.resolve(b))?;
            (Quadratic::least_squares(&a, &b)?, ProxFunction::L1 { weight: *lambda })
        }
        ProblemConfig::MpcSpec(m) => {
            let p = condense(&mpc_spec(cfg, m)?)?;
            (p.quadratic, ProxFunction::L1 { weight: p.lambda_l1 })
        }
        ProblemConfig::BuiltinTest { seed } => axprox::builtin::test_lasso_parts(*seed)?,
    };
    h.validate().map_err(|e| CliError::config(format!("problem: {e}")))?;
    let problem = CompositeProblem::from_quadratic(g.clone(), h.clone())?;
    let reference = reference_optimum(&problem)?;
    let problem = problem.with_reference(reference)?;
    Ok(LoadedProblem { g, h, problem })
}

fn solver_config(cfg: &ExperimentConfig, loaded: &LoadedProblem, seed: u64) -> SolverConfig {
    let l = loaded.problem.lipschitz();
    let grad = cfg.errors.gradient.as_ref().map(|g| g.model(seed));
    let step = cfg.solver.step.unwrap_or_else(|| {
        let limit = match &grad {
            Some(g) if g.mode == GradientErrorMode::Relative => l + g.bound,
            _ => l,
        };
        if limit > 0.0 {
            1.0 / limit
        } else {
            1.0
        }
    });
    let mut sc = SolverConfig::new(step, cfg.solver.max_iter)
        .with_errors(grad, cfg.errors.prox.as_ref().map(|p| p.model(seed)));
    sc.error_x = cfg.errors.prox_x.as_ref().map(|p| p.model(seed));
    if cfg.solver.kind == SolverKind::Axapgd {
        sc = sc.with_momentum(Momentum::Fista);
    }
    sc
}

fn admm_spec(cfg: &ExperimentConfig, n: usize) -> AdmmSpec {
    let a = &cfg.solver.admm;
    AdmmSpec::consensus(
        n,
        a.lambda_dual,
        DMatrix::identity(n, n) * a.m_x,
        DMatrix::identity(n, n) * a.m_z,
    )
}

pub fn run_solver(cfg: &ExperimentConfig, loaded: &LoadedProblem, seed: u64) -> Result<IterateTrace> {
    let sc = solver_config(cfg, loaded, seed);
    Ok(match cfg.solver.kind {
        SolverKind::Axpgd => ax_pgd(&loaded.problem, &sc)?,
        SolverKind::Axapgd => ax_apgd(&loaded.problem, &sc)?,
        SolverKind::Axwlmadmm => {
            let spec = admm_spec(cfg, loaded.problem.dim());
            ax_wlm_admm(&loaded.g, &loaded.h, &spec, &sc, Some(loaded.reference().f_star))?
        }
    })
}

/// Bound symbols for one run; `max_grad` is `sup ‖∇g‖∞` from the trace
/// (or `None` when no solver ran).
pub fn bound_params(
    cfg: &ExperimentConfig,
    loaded: &LoadedProblem,
    seed: u64,
    max_grad: Option<f64>,
) -> Result<BoundParams> {
    let sc = solver_config(cfg, loaded, seed);
    let b = &cfg.bounds;
    let n = loaded.problem.dim();
    let x0 = sc.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    let x_star = &loaded.reference().x_star;
    let dist0 = b.dist0.unwrap_or_else(|| (x_star - &x0).norm());

    let relative = sc.error_g.as_ref().is_some_and(|g| g.mode == GradientErrorMode::Relative);
    let m_grad = match (b.m_grad, max_grad) {
        (Some(m), _) => m,
        (None, Some(m)) => m,
        (None, None) if relative => {
            return Err(CliError::config(
                "bounds.m_grad: required for relative gradient errors when no solver trace is available",
            ))
        }
        (None, None) => 1.0,
    };

    let (step, z_model) = match cfg.solver.kind {
        // the ADMM bound does not involve a stepsize
        SolverKind::Axwlmadmm => (1.0, sc.error_h.as_ref()),
        _ => (sc.step, sc.error_h.as_ref()),
    };
    let mut p = BoundParams::from_models(
        sc.error_g.as_ref(),
        z_model,
        b.gamma,
        step,
        n,
        dist0,
        m_grad,
        b.lipschitz.unwrap_or(loaded.problem.lipschitz()),
    );
    p.p = b.p;
    if let Some(v) = b.d_x {
        p.d_x = v;
    }
    if let Some(v) = b.m_u {
        p.m_u = v;
    }
    let overrides = [
        (b.delta, &mut p.delta),
        (b.eps0, &mut p.eps0),
        (b.mean_eps_h, &mut p.mean_eps_h),
        (b.var_eps_h, &mut p.var_eps_h),
        (b.var_eps_g, &mut p.var_eps_g),
        (b.var_r, &mut p.var_r),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if cfg.solver.kind == SolverKind::Axwlmadmm {
        let a = &cfg.solver.admm;
        let x_model = sc.error_x.as_ref();
        // consensus splitting: z★ = x★, z⁰ = 0
        let dist0_x = (x_star - &x0).norm();
        p.admm = Some(AdmmBoundParams {
            eps_g0: x_model.map_or(0.0, |m| m.eps0),
            mean_eps_g: x_model.map_or(0.0, |m| m.mean),
            var_eps_g: x_model.map_or(0.0, |m| m.variance()),
            lambda_max_mx: a.m_x * a.m_x,
            dist0_x_mx_sq: a.m_x * dist0_x * dist0_x,
            dist0_x,
            dist0_z: x_star.norm(),
        });
    }
    p.validate().map_err(|e| CliError::config(format!("bounds: {e}")))?;
    Ok(p)
}

fn default_prior(kind: SolverKind) -> Option<PriorBound> {
    match kind {
        SolverKind::Axpgd => Some(PriorBound::HamadoucheBasic),
        SolverKind::Axapgd => Some(PriorBound::SchmidtAccel),
        SolverKind::Axwlmadmm => None,
    }
}

/// Bound columns of row `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub values: BoundValues,
    pub prior: Option<f64>,
    pub floor_asym: f64,
    pub floor_nonasym: f64,
}

pub fn bound_row(cfg: &ExperimentConfig, params: &BoundParams, k: usize) -> Result<BoundRow> {
    let values = match cfg.solver.kind {
        SolverKind::Axpgd => axpgd_bounds(k, params)?.values,
        SolverKind::Axapgd => axapgd_bounds(k, params)?.values,
        SolverKind::Axwlmadmm => admm_bounds(k, params)?,
    };
    let prior = cfg
        .bounds
        .prior
        .or(default_prior(cfg.solver.kind))
        .map(|which| prior_bounds(k, params, which))
        .transpose()?;
    let row = BoundRow {
        values,
        prior,
        floor_asym: probability_floor(params.gamma, params.p, k, Regime::Asymptotic)?,
        floor_nonasym: probability_floor(params.gamma, params.p, k, Regime::Nonasymptotic)?,
    };
    for (name, v) in [
        ("bound_thm_asym", Some(values.asymptotic)),
        ("bound_thm_nonasym", Some(values.nonasymptotic)),
        ("bound_combined", Some(values.combined)),
        ("bound_prior", prior),
    ] {
        if let Some(v) = v {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Numerical(format!("{name} at k={k} is {v}")));
            }
        }
    }
    Ok(row)
}

fn run_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("run_seed{seed}.csv"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn run_one(cfg: &ExperimentConfig, loaded: &LoadedProblem, seed: u64, mode: Mode) -> Result<SummaryRow> {
    let trace = run_solver(cfg, loaded, seed)?;
    let params = match mode {
        Mode::Compare => Some(bound_params(cfg, loaded, seed, Some(trace.max_grad_inf_norm))?),
        _ => None,
    };
    let f_star = loaded.reference().f_star;
    let mut summary = SummaryRow::new(seed, f_star);
    let mut rows = Vec::with_capacity(trace.records.len());
    // the ADMM bound is ergodic, so its trace reports the running mean
    let ergodic = cfg.solver.kind == SolverKind::Axwlmadmm;
    let mut running = 0.0;
    for rec in &trace.records[1..] {
        running += rec.f_value - f_star;
        let subopt = if ergodic { running / rec.k as f64 } else { rec.f_value - f_star };
        let bounds = params.as_ref().map(|p| bound_row(cfg, p, rec.k)).transpose()?;
        summary.observe(rec.k, rec.f_value, subopt, bounds.as_ref());
        rows.push(CsvRow::from_parts(rec.k, Some(rec.f_value), Some(subopt), bounds.as_ref()));
    }
    write_rows(&run_path(&cfg.out, seed), &rows)?;
    Ok(summary)
}

/// Result of [`run_experiment`]: per-seed summaries (sorted by seed) and
/// the files written.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summaries: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

/// Runs every seed (in parallel) and writes one CSV per run plus
/// `summary.csv`; in [`Mode::Bounds`] writes `bounds.csv` only.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let loaded = load_problem(cfg)?;
    ensure_dir(&cfg.out)?;

    if mode == Mode::Bounds {
        let seed = cfg.seeds[0];
        let params = bound_params(cfg, &loaded, seed, None)?;
        let rows = (1..=cfg.solver.max_iter)
            .map(|k| Ok(CsvRow::from_parts(k, None, None, Some(&bound_row(cfg, &params, k)?))))
            .collect::<Result<Vec<_>>>()?;
        let path = cfg.out.join("bounds.csv");
        write_rows(&path, &rows)?;
        return Ok(ExperimentOutcome {
            summaries: Vec::new(),
            files: vec![path],
        });
    }

    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let summaries = seeds
        .par_iter()
        .map(|&seed| run_one(cfg, &loaded, seed, mode))
        .collect::<Result<Vec<_>>>()?;
    let summary_path = cfg.out.join("summary.csv");
    write_summary(&summary_path, &summaries)?;
    let mut files: Vec<PathBuf> = seeds.iter().map(|&s| run_path(&cfg.out, s)).collect();
    files.push(summary_path);
    Ok(ExperimentOutcome { summaries, files })
}

/// Writes the condensed `H`, `q`, `λ` and prediction matrices of an MPC
/// config to `out`.
pub fn mpc_build(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let p = condense_config(cfg)?;
    ensure_dir(&cfg.out)?;
    let mut files = Vec::new();
    for (name, m) in [("H.txt", &p.h), ("F_a.txt", &p.f_a), ("Phi_a.txt", &p.phi)] {
        let path = cfg.out.join(name);
        write_matrix(&path, m)?;
        files.push(path);
    }
    let q = cfg.out.join("q.txt");
    write_vector(&q, &p.q)?;
    files.push(q);
    let lambda = cfg.out.join("lambda.txt");
    fs::write(&lambda, format!("{}\n", p.lambda_l1)).map_err(|e| CliError::io(&lambda, e))?;
    files.push(lambda);
    Ok(files)
}
