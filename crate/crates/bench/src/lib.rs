//! Criterion benchmarks for the classifier pipeline live in `benches/`.
