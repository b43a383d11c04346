use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("triangle {triangle} inverted or degenerate (signed area {area:.3e}, floor {floor:.3e})")]
    InvertedElement { triangle: usize, area: f64, floor: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("inclusion has zero area on this mesh; the Neumann problem is singular")]
    EmptyInclusion,

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("fields live on different meshes or element orders")]
    MeshMismatch,

    #[error("topological gradient has no negative minimum; no contact detected")]
    NoNegativeMinimum,

    #[error("no local minima available")]
    NoMinima,

    #[error("no scan point rejects the null hypothesis")]
    NoRejection,

    #[error("current region has no interface resolved by mesh edges")]
    InterfaceNotResolved,

    #[error("deformation direction vanishes")]
    ZeroDirection,

    #[error("step size {t:.3e} fell below tolerance {t0:.3e} without decrease")]
    StepTooSmall { t: f64, t0: f64 },

    #[error("realization {stream}: {source}")]
    Realization {
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Strips realization/iteration context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Realization { source, .. } | Error::Iteration { source, .. } => source.root(),
            other => other,
        }
    }
}
