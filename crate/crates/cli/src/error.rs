use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("detector spec `{spec}`: {reason}")]
    Detector { spec: String, reason: String },

    #[error(transparent)]
    Core(#[from] ecmimo::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn config_err(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), reason: reason.into() }
}
