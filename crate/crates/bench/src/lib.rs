//! Criterion benchmarks for the solver crate; see `benches/solvers.rs`.
