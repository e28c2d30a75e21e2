//! Config-driven experiment runs: training, analysis, sweeps and figures.

pub mod analysis;
pub mod config;
pub mod error;
pub mod run;
pub mod svg;
pub mod sweep;
pub mod train;

pub use error::{ExpError, ExpResult};
