//! File-based front end: point prompts, mask refinement, evaluation and
//! synthetic scenes. Errors leave as one JSON object on stderr with a
//! kind-specific exit code.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

pub use commands::run;
pub use error::{CliError, CliResult, ErrorKind};
