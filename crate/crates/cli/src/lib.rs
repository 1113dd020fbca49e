//! Scenario files, trace and page formats, experiment templates, run artifacts
//! and the acceptance suite behind the `confucius` command.

pub mod commands;
pub mod error;
pub mod output;
pub mod pages;
pub mod scenario;
pub mod templates;
pub mod traces;
pub mod validate;

pub use error::{CliError, Result};
