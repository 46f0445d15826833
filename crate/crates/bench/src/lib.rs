//! Criterion benchmarks (`benches/`) and the end-to-end acceptance run
//! (`tests/acceptance.rs`).
