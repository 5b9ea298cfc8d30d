//! Command line tools and the calibration service.

pub mod cli;
pub mod service;

pub use cli::run;
