//! Command-line harness around the `olsatt` library: simulated benchmarks,
//! CSV model fitting and prediction, and attention-weight export.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod model;
pub mod settings;
pub mod table;

pub use error::{CliError, CliResult, ExitClass};
pub use settings::Settings;
