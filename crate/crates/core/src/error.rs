//! Error type shared across the library.

/// Library-wide error enum. Variants map onto the CLI exit-code classes:
/// parse/validation/spec errors are configuration problems, `Numeric` is a
/// runtime numeric failure, `Capacity` is a simulator size limit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("arity: {0}")]
    Arity(String),
    #[error("wire: {0}")]
    Wire(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("routing: {0}")]
    Routing(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
