use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular matrix (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate Jacobian in element {element} (det = {det:e})")]
    DegenerateElement { element: usize, det: f64 },

    #[error("problem has no Dirichlet dofs; the global system would be singular")]
    NoDirichlet,

    #[error("partition error: {0}")]
    Partition(String),

    #[error("not enough corners on the boundary shared by subdomains {first} and {second}")]
    InsufficientCorners { first: usize, second: usize },

    #[error("insufficient constraints in subdomain {subdomain}: {reason}")]
    InsufficientConstraints { subdomain: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("level {level}{}: {source}", subdomain.map(|s| format!(", subdomain {s}")).unwrap_or_default())]
    AtLevel {
        level: usize,
        subdomain: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Error {
        Error::AtLevel {
            level,
            subdomain: None,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_subdomain(self, level: usize, subdomain: usize) -> Error {
        Error::AtLevel {
            level,
            subdomain: Some(subdomain),
            source: Box::new(self),
        }
    }

    /// Innermost error with level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_))
    }

    /// Breakdowns of the arithmetic rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Numerical(_)
                | Error::NotPositiveDefinite { .. }
                | Error::SingularMatrix { .. }
                | Error::InsufficientConstraints { .. }
        )
    }
}
