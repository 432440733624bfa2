//! Config-driven runner for quench experiments: evaluates echoes, spectra and
//! Loschmidt rates over a time grid, detects transitions and writes CSV
//! tables.

pub mod config;
pub mod oracle_check;
pub mod output;
pub mod run;

pub use config::Config;
pub use oracle_check::{run_oracle_check, OracleReport};
pub use run::{run_config, run_experiment, run_loschmidt, run_transitions, RunOptions, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] entecho::Error),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("oracle check failed")]
    OracleMismatch,
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::OracleMismatch => 3,
            CliError::Io(_) => 1,
        }
    }
}
