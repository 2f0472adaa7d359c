use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("observation requested at t={0}, which is not an observation time")]
    NotObservationTime(f64),

    #[error("trajectory log does not cover [{start}, {end}] (covered: [{covered_start}, {covered_end}])")]
    LogGap { start: f64, end: f64, covered_start: f64, covered_end: f64 },

    #[error("roadmap construction failed: {0}")]
    Roadmap(String),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("future offset ({dx}, {dy}) at horizon {horizon} lies outside the grid half-width {half_width}")]
    OutsideGrid { dx: f64, dy: f64, horizon: usize, half_width: f64 },

    #[error("training diverged for {model}: non-finite loss at epoch {epoch} (last finite loss {last_loss})")]
    Diverged { model: String, epoch: usize, last_loss: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("model file: {0}")]
    Model(String),

    #[error("step budget of {budget} edges exceeded while heading to target #{target_index} (node {target})")]
    StepBudget { budget: usize, target_index: usize, target: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Short stable identifier, used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::NotObservationTime(_) => "not_observation_time",
            Error::LogGap { .. } => "log_gap",
            Error::Roadmap(_) => "roadmap",
            Error::UnknownNode(_) => "unknown_node",
            Error::OutsideGrid { .. } => "outside_grid",
            Error::Diverged { .. } => "training_diverged",
            Error::EmptyDataset => "empty_dataset",
            Error::Model(_) => "model",
            Error::StepBudget { .. } => "step_budget",
            Error::Precondition(_) => "precondition",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
