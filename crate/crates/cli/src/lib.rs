//! Experiment harness behind the `maskfuse` binary.
//!
//! Each `cmd_*` function is one subcommand; `main.rs` only parses flags and
//! maps outcomes to exit codes.

pub mod cache;
pub mod commands;
pub mod dataset;
pub mod sweep;
pub mod synth;

use std::fmt;

pub use commands::{cmd_colorize, cmd_eval, cmd_fuse, EvalArgs, FuseArgs};
pub use sweep::{cmd_gtbox_study, cmd_sweep_order, cmd_sweep_threshold, GtBoxArgs, SweepArgs};
pub use synth::{cmd_synth, SynthConfig};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PARTIAL: i32 = 3;
}

/// Failure of a whole command. Per-image problems are not errors; they are
/// listed in [`Outcome::failures`].
#[derive(Debug)]
pub enum CommandError {
    /// Bad flags, unreadable manifest, invalid strategy...
    Config(anyhow::Error),
    /// Anything else (e.g. output not writable).
    Internal(anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => exit::CONFIG,
            CommandError::Internal(_) => exit::INTERNAL,
        }
    }

    pub(crate) fn config(e: impl Into<anyhow::Error>) -> Self {
        CommandError::Config(e.into())
    }

    pub(crate) fn internal(e: impl Into<anyhow::Error>) -> Self {
        CommandError::Internal(e.into())
    }
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "configuration error: {e:#}"),
            CommandError::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CommandError {}

pub type CommandResult<T> = Result<T, CommandError>;

/// What a command did, printed as a short summary.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct Outcome {
    pub summary: Vec<String>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            exit::SUCCESS
        } else {
            exit::PARTIAL
        }
    }
}
