use std::hint::black_box;

use axprox::builtin::{example_mpc_spec, random_lasso, test_lasso, test_lasso_parts};
use axprox::linalg::max_eigenvalue;
use axprox::mpc::condense;
use axprox::{
    ax_apgd, ax_pgd, ax_wlm_admm, axpgd_bounds, AdmmSpec, BoundParams, GradientErrorModel, Momentum,
    ProxErrorModel, SolverConfig,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

fn top_eigenvalue(c: &mut Criterion) {
    let mut group = c.benchmark_group("max_eigenvalue");
    for n in [20, 100, 400] {
        let m = DMatrix::from_fn(n, n, |i, j| ((i * 31 + j * 17) % 13) as f64 / 13.0);
        let spd = m.transpose() * &m + DMatrix::identity(n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &spd, |b, spd| {
            b.iter(|| max_eigenvalue(black_box(spd)).unwrap())
        });
    }
    group.finish();
}

fn lasso_solvers(c: &mut Criterion) {
    let p = test_lasso(7).unwrap();
    let exact = SolverConfig::for_problem(&p, 1000);
    let noisy = exact.clone().with_errors(
        Some(GradientErrorModel::absolute(0.01, 0.0025, 1)),
        Some(ProxErrorModel::new(1e-4, 1e-5, 1e-6, 1)),
    );
    let mut group = c.benchmark_group("lasso_30x20_1000_iters");
    group.bench_function("pgd", |b| b.iter(|| ax_pgd(black_box(&p), &exact).unwrap()));
    group.bench_function("pgd_noisy", |b| b.iter(|| ax_pgd(black_box(&p), &noisy).unwrap()));
    let fista = exact.clone().with_momentum(Momentum::Fista);
    group.bench_function("apgd", |b| b.iter(|| ax_apgd(black_box(&p), &fista).unwrap()));

    let (g, h) = test_lasso_parts(7).unwrap();
    let n = p.dim();
    let spec = AdmmSpec::consensus(n, 0.5, DMatrix::zeros(n, n), DMatrix::identity(n, n));
    let cfg = SolverConfig::new(1.0, 1000);
    group.bench_function("admm", |b| b.iter(|| ax_wlm_admm(&g, &h, black_box(&spec), &cfg, None).unwrap()));
    group.finish();

    let big = random_lasso(400, 200, 0.5, 3).unwrap();
    let cfg = SolverConfig::for_problem(&big, 200);
    c.bench_function("lasso_400x200_pgd_200_iters", |b| b.iter(|| ax_pgd(black_box(&big), &cfg).unwrap()));
}

fn mpc(c: &mut Criterion) {
    let spec = example_mpc_spec().unwrap();
    c.bench_function("mpc_condense", |b| b.iter(|| condense(black_box(&spec)).unwrap()));
    let p = condense(&spec).unwrap().problem;
    let cfg = SolverConfig::for_problem(&p, 5000);
    c.bench_function("mpc_pgd_5000_iters", |b| b.iter(|| ax_pgd(black_box(&p), &cfg).unwrap()));
}

fn bounds(c: &mut Criterion) {
    let params = BoundParams::noiseless(1e-3, 16, 2.0, 1e3);
    c.bench_function("axpgd_bounds_5000_points", |b| {
        b.iter(|| (1..=5000).map(|k| axpgd_bounds(k, black_box(&params)).unwrap().values.combined).sum::<f64>())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = top_eigenvalue, lasso_solvers, mpc, bounds
}
criterion_main!(benches);
