//! CLI error taxonomy, mapped onto process exit codes.

use thiserror::Error;

/// Anything that can stop a command. Configuration problems (bad file, bad
/// value, inconsistent scenario) exit with code 2; failures during execution
/// or output (engine errors, unwritable paths) exit with code 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_distinguish_config_from_runtime() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Runtime("x".into()).exit_code(), 3);
        assert!(CliError::Config("bad key".into())
            .to_string()
            .contains("configuration"));
    }
}
