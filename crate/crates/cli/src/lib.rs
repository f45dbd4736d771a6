//! Harness around `mpsvt-core`: record and MPS text files, the experiment
//! runner and its CSV outputs.

pub mod error;
pub mod experiment;
pub mod io;

pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, ExperimentKind, ExperimentSpec};
