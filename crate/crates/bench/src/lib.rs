//! Criterion benchmarks for froblab; see `benches/`.
