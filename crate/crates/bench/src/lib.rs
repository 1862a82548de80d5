//! Criterion benchmarks of the model kernels; see benches/models.rs.
