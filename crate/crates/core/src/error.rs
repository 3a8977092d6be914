use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("degenerate geometry: link {link} has length {length:.3e} m")]
    DegenerateGeometry { link: usize, length: f64 },

    #[error("inertia matrix is not invertible (min eigenvalue {0:.3e})")]
    SingularInertia(f64),

    #[error("estimated determinant {value:.3e} is within {threshold:.1e} of zero")]
    EstimatedSingularity { value: f64, threshold: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("log schema mismatch: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("fault at t = {t:.4} s: {source}")]
    Fault { t: f64, source: Box<Error> },
}

impl Error {
    /// Short machine-readable name used in CLI fault reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Singular(_) => "singular-configuration",
            Error::DegenerateGeometry { .. } => "degenerate-geometry",
            Error::SingularInertia(_) => "singular-inertia",
            Error::EstimatedSingularity { .. } => "estimated-singularity",
            Error::NonFinite(_) => "non-finite",
            Error::Dimension(_) => "dimension",
            Error::InvalidScenario(_) => "invalid-scenario",
            Error::Config(_) => "config",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Fault { source, .. } => source.kind(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
