//! Shared configuration plumbing: JSON documents with rejected unknown
//! keys, flag overrides, error-to-exit-code mapping.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing configuration (exit 2).
    Config(String),
    /// Anything from the core library, mapped by kind.
    Core(vsr_core::Error),
    /// A gradient-check group exceeded the tolerance (exit 5).
    GradCheckFailed { group: String, max_rel_err: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                vsr_core::Error::Contract(_) => 2,
                vsr_core::Error::Io { .. }
                | vsr_core::Error::Format { .. }
                | vsr_core::Error::SourceFailed { .. } => 3,
                vsr_core::Error::Diverged { .. } => 4,
            },
            CliError::GradCheckFailed { .. } => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::GradCheckFailed { group, max_rel_err } => write!(
                f,
                "gradient check failed: group {group} max relative error {max_rel_err:.3e} exceeds 1e-4"
            ),
        }
    }
}

impl From<vsr_core::Error> for CliError {
    fn from(e: vsr_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parse a JSON config document, rejecting unknown keys.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Per-item seed stream derivation (splitmix-style), so parallel workers
/// get independent deterministic streams.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
