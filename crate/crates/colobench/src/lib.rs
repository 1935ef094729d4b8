//! File formats, scene-level evaluation, leaderboard and report emission,
//! synthetic dataset export and the `colobench` command line, on top of
//! [`colobench_core`].

pub mod cli;
pub mod error;
pub mod eval;
pub mod generate;
pub mod io;
pub mod leaderboard;
pub mod report;

pub use colobench_core as core;
pub use error::{Error, Result};
