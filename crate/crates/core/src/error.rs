use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("packet [{lo}, {hi}] does not fit inside the grid [{x_min}, {x_max}]")]
    PacketOutsideGrid {
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
    },

    #[error("packet width must be positive, got sigma = {0}")]
    DegenerateSigma(f64),

    #[error("phonon sector {n} out of range (n_max = {n_max})")]
    SectorOutOfRange { n: usize, n_max: usize },

    #[error("state is not normalized (norm = {norm})")]
    Unnormalized { norm: f64 },

    #[error("non-finite amplitude at index {0}")]
    NonFinite(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error(
        "time step {dt} violates spectral stability (dt * max kinetic energy = {product} >= pi)"
    )]
    Stability { dt: f64, product: f64 },

    #[error("grid reflection guard tripped: {mass:e} of the norm reached the grid boundary band")]
    BoundaryLeak { mass: f64 },

    #[error("degenerate state: every outcome weight is below the sampling floor")]
    DegenerateState,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("histogram needs at least two strictly increasing edges")]
    EmptyEdges,

    #[error("window ({0}, {1}) contains no grid points")]
    EmptyWindow(f64, f64),

    #[error("no interior maximum/minimum pair inside the window")]
    NoFringe,

    #[error("maxima list is empty")]
    EmptyMaxima,

    #[error("only one class present; point-biserial correlation is undefined")]
    SingleClass,

    #[error("distances have zero variance")]
    ZeroVariance,

    #[error("elastic class has {0} records; at least 100 are needed to locate maxima")]
    InsufficientElastic(usize),

    #[error("{failed} of {total} trajectories failed; first error: {first}")]
    EnsembleFailed {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },

    #[error("trajectory {id}: {source}")]
    Trajectory {
        id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("records schema: {0}")]
    Schema(String),

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    TypeMismatch {
        key: String,
        line: usize,
        expected: &'static str,
        value: String,
    },

    #[error("{}`{key}`: {message}", line.map_or(String::new(), |l| format!("line {l}: ")))]
    InvariantViolation {
        key: String,
        message: String,
        line: Option<usize>,
    },

    #[error("line {line}: cannot parse `{text}` (expected `key = value`)")]
    Syntax { line: usize, text: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invariant(key: &str, message: impl Into<String>) -> Self {
        Error::InvariantViolation {
            key: key.to_string(),
            message: message.into(),
            line: None,
        }
    }

    /// Configuration problems (exit code 1 in the CLI).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::UnknownKey { .. }
                | Error::TypeMismatch { .. }
                | Error::InvariantViolation { .. }
                | Error::Syntax { .. }
                | Error::InvalidGrid(_)
                | Error::Geometry(_)
                | Error::PacketOutsideGrid { .. }
                | Error::DegenerateSigma(_)
                | Error::Stability { .. }
        )
    }

    /// I/O and persistence problems (exit code 3 in the CLI).
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Schema(_))
    }
}
