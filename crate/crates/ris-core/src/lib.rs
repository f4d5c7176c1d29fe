//! Core library for phase-only reflectarray beam synthesis: far-field
//! evaluation, multi-focus profile superposition, sidelobe detection,
//! random-mask suppression, and a self-contained DQN that learns the
//! per-sidelobe suppression parameters.

pub mod analysis;
pub mod config;
pub mod dqn;
pub mod env;
pub mod farfield;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod suppression;
pub mod synthesis;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or malformed configuration file.
    #[error("config: {0}")]
    Config(String),
    /// Mismatched dimensions between related inputs.
    #[error("dimension: {0}")]
    Dimension(String),
    /// Scalar argument outside its documented domain.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// Malformed or incompatible checkpoint data.
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    /// Underlying I/O failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
