use thiserror::Error;

pub type Result<T> = std::result::Result<T, CcxError>;

#[derive(Debug, Error)]
pub enum CcxError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("recipe error: {0}")]
    Recipe(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("pushforward error: {0}")]
    Pushforward(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("representation error: no representative for {0}")]
    Representation(String),
    #[error("horizon error: {0}")]
    Horizon(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("contraction error: {0}")]
    Contraction(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
