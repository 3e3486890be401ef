//! Criterion benchmarks for `rosenbench-core`; see `benches/`.
