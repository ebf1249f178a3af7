use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grids incompatible: {0}")]
    GridIncompatible(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("function does not vanish at the grid edge (|f| = {edge:e}, max |f| = {max:e})")]
    EdgeSupport { edge: f64, max: f64 },

    #[error("support [{lo}, {hi}] exceeds the padded region [{allowed_lo}, {allowed_hi}]")]
    SupportOverflow {
        lo: f64,
        hi: f64,
        allowed_lo: f64,
        allowed_hi: f64,
    },

    #[error("supports overlap: {0}")]
    SupportsOverlap(String),

    #[error("invalid bump: {0}")]
    InvalidBump(String),

    #[error("not a density: {0}")]
    NotADensity(String),

    #[error("not a characteristic function: {0}")]
    NotACharFn(String),

    #[error("no compact support: |M| = {edge:e} at the grid edge exceeds threshold {threshold:e}")]
    NoCompactSupport { edge: f64, threshold: f64 },

    #[error("order {requested} exceeds the cap {cap}")]
    OrderTooHigh { requested: usize, cap: usize },

    #[error("lambda {lambda} must exceed support extent {extent} by more than {margin}")]
    LambdaTooSmall {
        lambda: f64,
        extent: f64,
        margin: f64,
    },

    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("perturbation does not annihilate moment {order}: |q| = {value:e} > {tolerance:e}")]
    PerturbationNotAnnihilating {
        order: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("theta {theta} is not a multiple of the grid spacing {dx}")]
    ThetaOffGrid { theta: f64, dx: f64 },

    #[error("flow by theta {theta} moves the support off the grid")]
    FlowLeavesGrid { theta: f64 },

    #[error("grid of {n} points exceeds the oracle cap {cap}")]
    GridTooLarge { n: usize, cap: usize },

    #[error("operator output leaks {fraction:e} of its mass outside the input support (limit {limit:e})")]
    SupportLeak { fraction: f64, limit: f64 },

    #[error("cross term <f{l}, A^{order} f{m}> = {magnitude:e} exceeds {limit:e}")]
    CrossTermLeak {
        l: usize,
        m: usize,
        order: usize,
        magnitude: f64,
        limit: f64,
    },

    #[error("inverted density differs from |FT|² by {distance:e} (limit {limit:e})")]
    InversionMismatch { distance: f64, limit: f64 },

    #[error("characteristic function is truncated: |M| = {edge:e} at the theta-grid edge")]
    TruncatedCharFn { edge: f64 },

    #[error("imaginary residue {residue:e} exceeds {limit:e} ({context})")]
    ImaginaryResidue {
        residue: f64,
        limit: f64,
        context: &'static str,
    },

    #[error("family is empty")]
    EmptyFamily,

    #[error("artifacts do not reproduce the recorded report: {0}")]
    ReplayMismatch(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
