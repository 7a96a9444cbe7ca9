use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("task {index}: {reason}")]
    InvalidTask { index: usize, reason: String },

    /// A propagated execution window is shorter than the task's processing time.
    #[error("task {task} cannot be scheduled in the given order (propagated window too short)")]
    InfeasibleOrder { task: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("negative idle duration {0}")]
    NegativeDuration(f64),

    #[error("idle energy function is not concave (violation near delta = {at})")]
    NonConcaveFunction { at: f64 },

    #[error("transition graph induces a non-concave idle energy function (violation at delta = {at})")]
    NonConcaveInduced { at: f64 },

    #[error("furnace model is not admissible: {0}")]
    NotAdmissible(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("least-squares system is rank deficient")]
    SingularSystem,

    #[error("series of length {len} is too short for a window of {window}")]
    TooShortSeries { len: usize, window: usize },

    #[error("measured temperature at sample {index} is zero")]
    DivisionByZeroTemperature { index: usize },

    #[error("scheduling horizon has zero length")]
    DegenerateHorizon,

    #[error("machine is fully utilised, no idle capacity")]
    FullyUtilised,

    #[error("energy graph has no source-to-sink path")]
    NoPath,

    #[error("vertex is not a task vertex")]
    NotATaskVertex,

    #[error("instance too large for brute force: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
