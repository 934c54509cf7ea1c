//! Criterion benchmarks for the hprobe pipeline live in `benches/`.
