use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed config: {0}")]
    Config(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        })
    }
}

impl From<cgrg::Error> for CliError {
    fn from(e: cgrg::Error) -> Self {
        match e {
            cgrg::Error::Io(_) | cgrg::Error::Csv(_) => CliError::Io(e.to_string()),
            cgrg::Error::Parse(_) => CliError::Config(e.to_string()),
            other => CliError::Infeasible(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
