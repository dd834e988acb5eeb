use serde::{Deserialize, Serialize};

use super::{ExperimentError, PointingTask, Target};
use crate::geometry::Vec3;
use crate::sim_server::FrameRecord;

/// Movements discarded at the start of every trial while the participant
/// adapts to the target size.
pub const DISCARDED_MOVEMENTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub frame_us: u64,
    pub target: Target,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HitLog {
    pub hits: Vec<Hit>,
    /// Time between consecutive hits, s.
    pub durations: Vec<f64>,
}

/// Alternating-target state machine starting at target A.
#[derive(Clone, Debug)]
pub struct HitDetector {
    task: PointingTask,
    next: Target,
    last_us: Option<u64>,
}

impl HitDetector {
    pub fn new(task: PointingTask) -> Self {
        Self {
            task,
            next: Target::A,
            last_us: None,
        }
    }

    pub fn task(&self) -> &PointingTask {
        &self.task
    }

    pub fn current(&self) -> Target {
        self.next
    }

    /// Registers one frame. Returns the target hit and the movement time
    /// since the previous hit, if any.
    pub fn observe(&mut self, frame_us: u64, particle: &Vec3) -> Option<(Target, Option<f64>)> {
        let center = self.task.center(self.next);
        if (particle - center).norm() > self.task.width / 2.0 {
            return None;
        }
        let hit = self.next;
        let mt = self.last_us.map(|t| (frame_us - t) as f64 * 1e-6);
        self.last_us = Some(frame_us);
        self.next = hit.other();
        Some((hit, mt))
    }
}

pub fn detect_hits(frames: &[FrameRecord], task: &PointingTask) -> HitLog {
    let mut det = HitDetector::new(*task);
    let mut log = HitLog::default();
    for f in frames {
        if let Some((target, mt)) = det.observe(f.frame_us, &f.particle()) {
            log.hits.push(Hit {
                frame_us: f.frame_us,
                target,
            });
            log.durations.extend(mt);
        }
    }
    log
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub id_bits: f64,
    pub mean_mt_s: f64,
    pub n_used: usize,
    pub n_discarded: usize,
}

pub fn summarize_trial(
    durations: &[f64],
    task: &PointingTask,
) -> Result<TrialSummary, ExperimentError> {
    // Movements recorded after the trial ended do not count.
    let durations = &durations[..durations.len().min(task.repetitions as usize)];
    if durations.len() <= DISCARDED_MOVEMENTS {
        return Err(ExperimentError::InsufficientData {
            movements: durations.len(),
            needed: DISCARDED_MOVEMENTS + 1,
        });
    }
    let used = &durations[DISCARDED_MOVEMENTS..];
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(ExperimentError::NonPositiveTime);
    }
    Ok(TrialSummary {
        id_bits: task.id_bits(),
        mean_mt_s: mean,
        n_used: used.len(),
        n_discarded: DISCARDED_MOVEMENTS,
    })
}
