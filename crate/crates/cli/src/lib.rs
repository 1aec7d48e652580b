//! Configuration, experiment pipeline and JSON reports behind the `defectlab` binary.

pub mod args;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::{Analysis, RunConfig, SweepAxis, SweepSpec};
pub use error::RunError;
pub use pipeline::{run, sweep, SweepOutcome, SweepRow};
pub use report::{RunReport, Verdict};

/// Thread cap from `DEFECTLAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("DEFECTLAB_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}
