use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame index {0} out of range (expected 0..=4)")]
    InvalidIndex(usize),

    #[error("degenerate coordinates at (r={r}, theta={theta}, psi={psi}): {what}")]
    DegenerateCoordinate {
        r: f64,
        theta: f64,
        psi: f64,
        what: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite integrand at node (r={r}, theta={theta}, psi={psi}, phi={phi})")]
    NonFinite {
        r: f64,
        theta: f64,
        psi: f64,
        phi: f64,
    },

    #[error("radial sequence diverges: {0}")]
    Divergent(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid file, line {line}: {msg}")]
    GridFormat { line: usize, msg: String },

    #[error("point (r={r}, theta={theta}, psi={psi}, phi={phi}) is not a node of the sampled grid")]
    OffGrid {
        r: f64,
        theta: f64,
        psi: f64,
        phi: f64,
    },

    #[error("io: {0}")]
    Io(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidParameter(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
