//! Benchmarks for tgdecay-core live in `benches/`.
