//! Command line surface over the core pipeline: corpus synthesis,
//! topic precomputation, training, generation, evaluation, and
//! ablation sweeps. Every command writes a run manifest next to its
//! outputs.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod plots;

use std::path::{Path, PathBuf};

use tarnlab_core::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Maps a pipeline error onto the command exit code.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Argument(_) | Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Resolves a possibly relative path against `TARNLAB_DATA_DIR` when
/// the variable is set; absolute paths pass through untouched.
pub fn resolve_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("TARNLAB_DATA_DIR") {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
