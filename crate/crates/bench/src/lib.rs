//! Benchmarks for the reconstruction kernels live in `benches/`.
