//! Library surface of the `mre` command line tool: config parsing, the
//! four commands, and report serialization. The binary in `main.rs` is a
//! thin wrapper so integration tests can drive everything in-process.

pub mod commands;
pub mod config;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dimension error at {path}: expected {expected}, got {got}")]
    Dimension {
        path: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Engine(#[from] mre_core::EngineError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Exit code contract: 0 pass, 1 error, 2 mathematical-verdict fail.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT_FAIL: i32 = 2;
