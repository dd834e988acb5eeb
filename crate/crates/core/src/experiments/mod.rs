//! Fitts' law pointing experiments: target tasks, hit detection on frame
//! logs, trial summaries, regression and throughput, and condition order.

mod analysis;
mod fitts;
mod harness;
mod hits;
mod schedule;
mod task;

pub use analysis::{
    analyze_logs, analyze_trial, analyze_trials, condition_path, read_condition, write_condition,
    write_model_csv, write_trials_csv, ConditionFile, FittsAnalysis, TrialRow,
};
pub use fitts::{
    fit_fitts, group_by_id, index_of_difficulty, participant_group_means, participant_throughput,
    throughput, FittsModel, GroupMean,
};
pub use harness::PointingHarness;
pub use hits::{
    detect_hits, summarize_trial, Hit, HitDetector, HitLog, TrialSummary, DISCARDED_MOVEMENTS,
};
pub use schedule::{generate_condition_schedule, latin_square_row};
pub use task::{
    study_conditions, Direction, PointingTask, Target, STUDY_AMPLITUDE, STUDY_MOVEMENTS,
    STUDY_WIDTHS,
};

use crate::sim_server::RecordError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("target width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("invalid pointing task: {0}")]
    InvalidTask(String),
    #[error("{movements} movements recorded, at least {needed} needed")]
    InsufficientData { movements: usize, needed: usize },
    #[error("regression needs at least two distinct IDs, got {0}")]
    TooFewGroups(usize),
    #[error("movement times must be positive")]
    NonPositiveTime,
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{path}: {source}")]
    Log {
        path: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad condition file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
