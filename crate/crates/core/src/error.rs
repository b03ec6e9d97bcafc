use thiserror::Error;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Catalog,
    Load,
    Parse,
    Resolve,
    Policy,
    Plan,
    Execute,
    Codec,
    Circuit,
}

impl Stage {
    /// Plan-time failures (everything before execution starts).
    pub fn is_plan_time(self) -> bool {
        !matches!(self, Stage::Execute | Stage::Codec)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("catalog config parse error at line {line}, column {column}: {message}")]
    CatalogSyntax { line: usize, column: usize, message: String },

    #[error("data error: {0}")]
    Load(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("resolve error: {0}")]
    Resolve(String),

    #[error("policy violation: {0}")]
    Policy(String),

    #[error("planning error: {0}")]
    Plan(String),

    #[error("execution error: {0}")]
    Execute(String),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("circuit error: {0}")]
    Circuit(String),
}

impl Error {
    pub fn stage(&self) -> Stage {
        match self {
            Error::Catalog(_) | Error::CatalogSyntax { .. } => Stage::Catalog,
            Error::Load(_) => Stage::Load,
            Error::Syntax { .. } | Error::Unsupported(_) => Stage::Parse,
            Error::Resolve(_) => Stage::Resolve,
            Error::Policy(_) => Stage::Policy,
            Error::Plan(_) => Stage::Plan,
            Error::Execute(_) => Stage::Execute,
            Error::Codec(_) => Stage::Codec,
            Error::Circuit(_) => Stage::Circuit,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
