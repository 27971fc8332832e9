//! Experiment registry, configuration, execution and reporting for the
//! `sigma-lab` command.

pub mod config;
pub mod error;
pub mod experiments;
pub mod registry;
pub mod report;
pub mod runner;
pub mod sim;

pub use error::{LabError, Result};
