use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate system: all stiffness coefficients are zero")]
    DegenerateSystem,
    #[error("forcing profile has no accelerogram samples")]
    MissingData,
    #[error("fixed point at {x} is a {kind}, expected a saddle")]
    WrongKind { x: f64, kind: String },
    #[error("manifold seed escaped immediately (seed offset {0} too large)")]
    SeedTooLarge(f64),
    #[error("stroboscopic map did not settle to a reference point from x = {0}")]
    NoReference(f64),
    #[error("safe zone is empty")]
    EmptySafeZone,
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("danger index undefined: initial safe zone has zero sampled area")]
    UndefinedIndex,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: time {t} does not increase")]
    Ordering { line: usize, t: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error("empty window [{0}, {1}]")]
    EmptyWindow(f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that stem from the numerics rather than I/O or parsing.
    pub fn is_numeric(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Parse { .. } | Error::Format(_) | Error::Ordering { .. }
        )
    }
}
