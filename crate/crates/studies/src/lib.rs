//! Sweeps, tables and check suites on top of `thinpl-core`, plus the pieces
//! of the `thinpl` command line.

pub mod coefficients;
pub mod config;
pub mod convergence;
pub mod csvout;
pub mod identity;
pub mod pipeline;

pub use config::StudyConfig;
pub use convergence::{run_convergence_study, ConvergenceReport};
