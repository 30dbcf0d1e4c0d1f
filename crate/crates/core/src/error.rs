use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("functions live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at cell {cell}")]
    NonFinite { cell: usize, value: f64 },

    #[error("weight is not strictly positive at cell {cell} (value {value})")]
    NonPositiveWeight { cell: usize, value: f64 },

    #[error("kernel `{kernel}` returned {value} at x = {x:?}, y = {ys:?}")]
    NonFiniteKernel {
        kernel: String,
        x: Vec<f64>,
        ys: Vec<Vec<f64>>,
        value: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "root cube too small: average {average} exceeds height {height} on every dyadic cube \
         containing the support (largest tried has side {side})"
    )]
    RootTooSmall { average: f64, height: f64, side: f64 },

    #[error("cubes {first} and {second} of family {family} overlap")]
    OverlappingCubes {
        family: usize,
        first: usize,
        second: usize,
    },

    #[error("whitney decomposition failed: {0}")]
    Whitney(String),

    #[error("target measure {target} exceeds the measure {available} of the enclosing cube")]
    TargetExceedsCube { target: f64, available: f64 },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Innermost error, with stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
