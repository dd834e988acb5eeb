use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    detect_hits, fit_fitts, group_by_id, participant_group_means, summarize_trial, ExperimentError,
    FittsModel, GroupMean, PointingTask, TrialSummary,
};
use crate::sim_server::{read_session, FrameRecord};

/// Task description stored next to a recorded pointing session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionFile {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub participant: Option<u32>,
    pub task: PointingTask,
}

impl ConditionFile {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.task.label())
    }
}

/// `session.csv` → `session.task.json`.
pub fn condition_path(log: &Path) -> PathBuf {
    log.with_extension("task.json")
}

pub fn write_condition(log: &Path, condition: &ConditionFile) -> Result<(), ExperimentError> {
    let path = condition_path(log);
    let text = serde_json::to_string_pretty(condition).expect("conditions always serialize");
    std::fs::write(&path, text).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_condition(log: &Path) -> Result<ConditionFile, ExperimentError> {
    let path = condition_path(log);
    let text = std::fs::read_to_string(&path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// One output row per analysed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub condition: String,
    pub id_bits: f64,
    pub mean_mt_s: f64,
    pub n_used: usize,
    pub n_discarded: usize,
}

pub fn analyze_trial(
    frames: &[FrameRecord],
    task: &PointingTask,
) -> Result<TrialSummary, ExperimentError> {
    summarize_trial(&detect_hits(frames, task).durations, task)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittsAnalysis {
    pub trials: Vec<TrialRow>,
    pub groups: Vec<GroupMean>,
    pub model: FittsModel,
}

/// Trials with a participant id are averaged per participant before the
/// ID groups are formed.
pub fn analyze_trials(
    trials: &[(ConditionFile, TrialSummary)],
) -> Result<FittsAnalysis, ExperimentError> {
    let rows = trials
        .iter()
        .map(|(c, s)| TrialRow {
            condition: c.label(),
            id_bits: s.id_bits,
            mean_mt_s: s.mean_mt_s,
            n_used: s.n_used,
            n_discarded: s.n_discarded,
        })
        .collect();
    let groups = if trials.iter().any(|(c, _)| c.participant.is_some()) {
        let mut by: BTreeMap<Option<u32>, Vec<TrialSummary>> = BTreeMap::new();
        for (c, s) in trials {
            by.entry(c.participant).or_default().push(*s);
        }
        participant_group_means(&by.into_values().collect::<Vec<_>>())
    } else {
        let summaries: Vec<_> = trials.iter().map(|(_, s)| *s).collect();
        group_by_id(&summaries)
    };
    let model = fit_fitts(&groups)?;
    Ok(FittsAnalysis {
        trials: rows,
        groups,
        model,
    })
}

/// Analyses recorded sessions, each with its condition file alongside.
pub fn analyze_logs(logs: &[PathBuf]) -> Result<FittsAnalysis, ExperimentError> {
    let mut trials = Vec::with_capacity(logs.len());
    for log in logs {
        let condition = read_condition(log)?;
        let frames = read_session(log)?;
        let summary =
            analyze_trial(&frames, &condition.task).map_err(|e| ExperimentError::Log {
                path: log.display().to_string(),
                source: Box::new(e),
            })?;
        trials.push((condition, summary));
    }
    analyze_trials(&trials)
}

fn csv_error(path: &Path, e: csv::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

pub fn write_trials_csv(path: &Path, rows: &[TrialRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_model_csv(path: &Path, model: &FittsModel) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.serialize(model).map_err(|e| csv_error(path, e))?;
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}
