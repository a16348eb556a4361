//! Command-line front end: spec parsing, task dispatch and report output.

pub mod error;
pub mod output;
pub mod run;
mod schema;
pub mod spec;

use std::path::Path;

pub use error::CliError;
pub use spec::{parse_model_spec, ModelSpec, Overrides, TaskKind};

/// Exit code for errors of any kind.
pub const EXIT_ERROR: i32 = 3;

/// Parses, runs and renders one spec. Returns the exit code and the report
/// text.
pub fn execute(text: &str, overrides: &Overrides, out_dir: Option<&Path>) -> Result<(i32, String), CliError> {
    let spec = parse_model_spec(text, overrides)?;
    let outcome = run::run(&spec)?;
    let report = output::render(&spec, &outcome);
    if let Some(dir) = out_dir {
        output::write_all(dir, &report, &outcome)?;
    }
    Ok((outcome.exit_code(), report))
}
