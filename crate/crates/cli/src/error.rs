use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: foa_core::Error,
    },
    #[error(transparent)]
    Core(#[from] foa_core::Error),
}

impl CliError {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::File {
            path: path.into(),
            source,
        }
    }

    pub fn input(path: impl Into<PathBuf>, source: foa_core::Error) -> Self {
        CliError::Input {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => EXIT_CONFIG,
            CliError::File { .. } => EXIT_DATA,
            CliError::Input { source, .. } | CliError::Core(source) => core_exit_code(source),
        }
    }
}

pub fn core_exit_code(e: &foa_core::Error) -> i32 {
    use foa_core::Error as E;
    match e.root() {
        E::Parameter(_) | E::Stability(_) => EXIT_CONFIG,
        E::Convergence { .. } | E::Singular { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use foa_core::Error as E;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(core_exit_code(&E::Stability("cfl".into())), EXIT_CONFIG);
        assert_eq!(core_exit_code(&E::Parameter("x".into())), EXIT_CONFIG);
        assert_eq!(core_exit_code(&E::Data("x".into())), EXIT_DATA);
        assert_eq!(
            core_exit_code(&E::Parse {
                offset: 0,
                message: "x".into()
            }),
            EXIT_DATA
        );
        assert_eq!(
            core_exit_code(&E::Convergence {
                iterations: 3,
                residual: 1.0
            }),
            EXIT_NUMERICAL
        );
        assert_eq!(core_exit_code(&E::Singular { x: 0, y: 0, rank: 1 }), EXIT_NUMERICAL);
        let staged = E::Convergence {
            iterations: 3,
            residual: 1.0,
        }
        .at_stage(4, "potential");
        assert_eq!(core_exit_code(&staged), EXIT_NUMERICAL);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_CONFIG);
    }
}
