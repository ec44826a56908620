//! Criterion benchmarks for `mmab-core`; see `benches/simulation.rs`.
