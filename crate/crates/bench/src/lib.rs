//! Criterion benchmarks for the basis solver and both quasienergy engines;
//! run with `cargo bench -p atomion-bench`.
