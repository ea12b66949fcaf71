use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid spacing must be identical on every axis (got {0:?})")]
    NonuniformSpacing(Vec<f64>),

    #[error("region does not contain any grid cell")]
    EmptyRegion,

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("rate (a+b)^{alpha} is singular at a+b = 0")]
    SingularRate { alpha: f64 },

    #[error("rate kind {0} has no pairwise form")]
    NotPairwise(&'static str),

    #[error("negative density {value} in component {component} at cell {cell}")]
    NegativeDensity { cell: usize, component: usize, value: f64 },

    #[error("nonpositive density {value} at {location}")]
    NonPositive { location: String, value: f64 },

    #[error("Newton failed at cell {cell} after {halvings} dt halvings (residual {residual:e}, state {state:?})")]
    NewtonFailure { cell: usize, halvings: u32, residual: f64, state: Vec<f64> },

    #[error("snapshot time {t} is not a multiple of dt = {dt}")]
    ScheduleMisaligned { t: f64, dt: f64 },

    #[error("snapshot schedule must be strictly increasing within [0, t_end]")]
    ScheduleOrder,

    #[error("snapshot schedules differ between runs")]
    ScheduleMismatch,

    #[error("limit solver time step underflow (dt = {dt:e}, max diffusivity {max_d:e})")]
    TimeStepUnderflow { dt: f64, max_d: f64 },

    #[error("barrier case {case} is incompatible with n = {n}, alpha = {alpha}: {reason}")]
    IncompatibleBarrier { case: &'static str, n: usize, alpha: f64, reason: String },

    #[error("t = {t} lies outside the barrier life span [0, {end})")]
    OutsideLifeSpan { t: f64, end: f64 },

    #[error("point lies outside the validity region")]
    OutsideValidityRegion,

    #[error("finite differences are invalid at the free boundary of the support")]
    SupportBoundary,

    #[error("Taylor smallness |a eps + b eps^2| <= 1/2 violated (value {0})")]
    TaylorSmallness(f64),

    #[error("initial data not admissible: {0}")]
    NotAdmissible(String),

    #[error("lower barrier exceeds upper barrier at cell {cell} ({lower} > {upper})")]
    CrossedBarriers { cell: usize, lower: f64, upper: f64 },

    #[error("barrier precondition violated at cell {cell}, component {component}: margin {margin:e}")]
    BarrierPrecondition { cell: usize, component: usize, margin: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
