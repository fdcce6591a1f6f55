//! Benchmark-only crate; see `benches/projections.rs`.
