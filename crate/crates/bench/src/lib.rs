//! Criterion benchmarks for `paramodular-core`; see `benches/`.
