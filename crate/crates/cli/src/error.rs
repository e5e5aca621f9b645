use hybrid_swap::Error;
use thiserror::Error as ThisError;

/// Failures of a run, each mapped to a process exit status.
#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unstable parameters: {0}")]
    Unstable(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Unstable(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Configuration { .. } | Error::Structural(_) => CliError::Config(e.to_string()),
            Error::Unstable { .. } => CliError::Unstable(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let cases = [
            (
                Error::Configuration {
                    missing: vec!["atom_number".into()],
                },
                2,
            ),
            (Error::Structural("bad".into()), 2),
            (Error::Unstable { max_real_part: 1.0 }, 3),
            (Error::NonConvergence { residual: 1.0 }, 4),
            (
                Error::Quadrature {
                    requested: 1e-6,
                    achieved: 1e-3,
                    panels: 10,
                },
                4,
            ),
            (Error::Numeric("nan".into()), 4),
        ];
        for (e, code) in cases {
            assert_eq!(CliError::from_core(e).exit_code(), code);
        }
        assert_eq!(CliError::Io(std::io::Error::other("x")).exit_code(), 1);
    }
}
