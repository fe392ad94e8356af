use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    /// Malformed input data (schema violations, unknown labels, ...).
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] fnar::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Input(_) => "input",
            CliError::Model(e) if is_numerical(e) => "numerical",
            CliError::Model(_) => "input",
        }
    }

    /// 2 for configuration, I/O and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.kind() == "numerical" {
            3
        } else {
            2
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Report<'a> {
            schema_version: u32,
            error: Body<'a>,
        }
        serde_json::to_string(&Report {
            schema_version: crate::SCHEMA_VERSION,
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
            },
        })
        .expect("error report serializes")
    }
}

fn is_numerical(e: &fnar::Error) -> bool {
    use fnar::Error::*;
    matches!(
        e,
        RankExceeded { .. }
            | RankDeficient { .. }
            | Singular(_)
            | InsufficientData(_)
            | Unstable(_)
            | BootstrapFailures { .. }
    )
}
