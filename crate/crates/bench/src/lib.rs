//! Criterion benchmarks for the piston simulators; see `benches/`.
