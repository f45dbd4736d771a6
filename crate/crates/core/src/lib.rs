//! Reconstruction of pure many-body states from the expectation values of
//! local Pauli strings.
//!
//! The measured values `p_k = <phi|P_k|phi>` of every Pauli string supported
//! on a contiguous window of the chain are fed to a rank-one variant of
//! singular value thresholding. The iterate `Y_n = sum_k a_k P_k` is only ever
//! stored through its real coefficients `a_k`, so it has the form of a local
//! Hamiltonian and its top eigenvector can be found variationally with DMRG on
//! a matrix product state. An exact statevector backend serves as the oracle
//! for small chains.
//!
//! Module map:
//!
//! - [`pauli`]: Pauli strings, windows, the string table and coefficient vectors.
//! - [`dense`]: exact statevector backend, reduced density matrices, reference shrinks.
//! - [`mps`]: matrix product states and operators, DMRG extremal eigensolver.
//! - [`targets`]: critical Ising, random nearest-neighbour and W-state targets.
//! - [`measure`]: exact and noisy measurement records.
//! - [`svt`]: the reconstruction loop with pluggable eigenvector backends.

pub mod dense;
pub mod error;
pub mod krylov;
pub mod measure;
pub mod mps;
pub mod pauli;
pub mod state;
pub mod svt;
pub mod targets;

pub use error::{Error, Result};
pub use krylov::Extremum;
pub use measure::MeasurementRecord;
pub use mps::{Mpo, Mps};
pub use pauli::{CoefficientVector, PauliAxis, PauliString, StringTable, Window};
pub use state::State;
pub use svt::{SvtConfig, SvtResult};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Largest chain length for which exact statevectors are materialized.
pub const DEFAULT_DENSE_LIMIT: usize = 14;
