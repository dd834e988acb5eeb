use super::{HitDetector, HitLog, PointingTask};
use crate::sim_server::{FrameObserver, TickContext};

/// Live pointing trial: watches the particle, tags hits in the frame log
/// and raises the target-hit flag for audio feedback.
pub struct PointingHarness {
    detector: HitDetector,
    log: HitLog,
}

impl PointingHarness {
    pub fn new(task: PointingTask) -> Self {
        Self {
            detector: HitDetector::new(task),
            log: HitLog::default(),
        }
    }

    pub fn hit_log(&self) -> &HitLog {
        &self.log
    }

    /// All requested movements done.
    pub fn is_complete(&self) -> bool {
        self.log.durations.len() >= self.detector.task().repetitions as usize
    }
}

impl FrameObserver for PointingHarness {
    fn after_step(&mut self, ctx: &mut TickContext<'_>) {
        if self.is_complete() {
            return;
        }
        if let Some((target, mt)) = self.detector.observe(ctx.frame_us, &ctx.particle.position) {
            self.log.hits.push(super::Hit {
                frame_us: ctx.frame_us,
                target,
            });
            self.log.durations.extend(mt);
            ctx.events.push(target.event().to_string());
            ctx.target_hit = true;
        }
    }

    fn status(&self) -> Option<serde_json::Value> {
        let task = self.detector.task();
        let current = self.detector.current();
        Some(serde_json::json!({
            "task": task.label(),
            "id_bits": task.id_bits(),
            "width": task.width,
            "targets": [task.center(super::Target::A), task.center(super::Target::B)],
            "current": if current == super::Target::A { "A" } else { "B" },
            "hits": self.log.hits.len(),
            "movements": self.log.durations.len(),
            "complete": self.is_complete(),
        }))
    }
}
