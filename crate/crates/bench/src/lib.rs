//! Criterion benchmarks for the foa-core solvers live in `benches/`.
