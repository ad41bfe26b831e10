//! Command-line orchestration of the quatflag experiments: configuration,
//! experiment runners and report output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};

pub use config::{ExperimentKind, ExperimentSpec};
pub use error::{CliError, CliResult};
pub use report::{Outcome, Report};

/// Run `spec` and write its outputs to `out_dir`; returns the outcome and the files written.
pub fn run(spec: &ExperimentSpec, workers: usize, out_dir: &Path) -> CliResult<(Outcome, Vec<PathBuf>)> {
    let outcome = experiments::run_experiment(spec, workers)?;
    let files = report::write_outputs(&outcome, out_dir, spec.output.jsonl)?;
    Ok((outcome, files))
}
