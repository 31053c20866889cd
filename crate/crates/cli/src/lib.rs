//! Library side of the `ergodykit` command-line tool.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] config::ConfigError),
    #[error("input: {0}")]
    Input(String),
    #[error("{0}")]
    Core(#[from] ergodykit_core::Error),
    #[error("cannot write {path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 2,
            CliError::Io(..) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ergodykit_core::Error;

    #[test]
    fn exit_codes_follow_the_contract() {
        let numeric = CliError::Core(Error::NonConvergence { what: "power iteration".into(), iterations: 10 });
        assert_eq!(numeric.exit_code(), 3);
        assert_eq!(CliError::Core(Error::Numeric("singular".into())).exit_code(), 3);
        assert_eq!(CliError::Core(Error::Domain("bad".into())).exit_code(), 2);
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Config(config::ConfigError::Invalid("x".into())).exit_code(), 2);
        assert_eq!(CliError::Io(PathBuf::from("o"), std::io::Error::other("x")).exit_code(), 1);
    }
}
