//! Problem files, population setup, run logs, reports and the CLI.

pub mod cli;
mod init;
mod log;
mod problem;
mod report;

pub use init::{init_populations, InitialPopulation};
pub use log::{LogError, LogEvent, ResultSummary, RunLog, RunLogWriter, LOG_FORMAT, LOG_VERSION};
pub use problem::{extract_anchors, Example, ProblemError, ProblemSpec};
pub use report::render_report;
