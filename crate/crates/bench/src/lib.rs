//! Criterion benchmarks for the sdre checks live in `benches/`.
