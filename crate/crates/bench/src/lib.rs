//! Benchmark-only crate; see `benches/generator.rs`.
