//! Library side of the `skms` command-line tool: configuration, the
//! subcommands and report output.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use serde_json::json;

use config::{ConfigError, RunConfig};
use report::{Report, SCHEMA_VERSION};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SKMS_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Compute(skms::Error),
    Io(std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<skms::Error> for CliError {
    fn from(e: skms::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Compute(e) => write!(f, "computation error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const COMPUTE: i32 = 3;
    pub const VERIFICATION: i32 = 4;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Compute(_) | CliError::Io(_) => exit::COMPUTE,
        }
    }

    /// Machine-readable form printed with `--error-json`.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, path) = match self {
            CliError::Config(e) => ("config", Some(e.path.clone())),
            CliError::Compute(_) => ("computation", None),
            CliError::Io(_) => ("io", None),
        };
        let message = match self {
            CliError::Config(e) => e.message.clone(),
            other => other.to_string(),
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "kind": kind, "path": path, "message": message },
            "exit_code": self.exit_code(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Modes,
    Green,
    Twopoint,
    KmsCheck,
    Decay,
    Integrability,
    FlatCompare,
}

impl Command {
    pub const ALL: [Command; 7] =
        [Command::Modes, Command::Green, Command::Twopoint, Command::KmsCheck, Command::Decay, Command::Integrability, Command::FlatCompare];
}

/// Runs one subcommand on a dedicated pool of `workers` threads.
pub fn run(cmd: Command, cfg: &RunConfig, workers: usize) -> Result<Report, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    pool.install(|| match cmd {
        Command::Modes => commands::modes(cfg),
        Command::Green => commands::green(cfg),
        Command::Twopoint => commands::twopoint(cfg),
        Command::KmsCheck => commands::kms_check(cfg),
        Command::Decay => commands::decay(cfg),
        Command::Integrability => commands::integrability(cfg),
        Command::FlatCompare => commands::flat_compare(cfg),
    })
}

/// Output directory: flag, then config, then the environment, then `skms-out`.
pub fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("skms-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_dir_precedence() {
        let mut cfg = config::load(None, &[]).unwrap();
        std::env::set_var(OUT_DIR_ENV, "from-env");
        assert_eq!(out_dir(None, &cfg), PathBuf::from("from-env"));
        cfg.output.dir = Some("from-config".into());
        assert_eq!(out_dir(None, &cfg), PathBuf::from("from-config"));
        assert_eq!(out_dir(Some("from-flag".into()), &cfg), PathBuf::from("from-flag"));
        std::env::remove_var(OUT_DIR_ENV);
        cfg.output.dir = None;
        assert_eq!(out_dir(None, &cfg), PathBuf::from("skms-out"));
    }
}
