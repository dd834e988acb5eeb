use std::time::{Duration, Instant};

use serde::Serialize;

/// Remaining time below which the wait yields instead of sleeping. Wakeups
/// from long sleeps can be several milliseconds late on virtual machines.
pub const SPIN_WINDOW: Duration = Duration::from_millis(3);

/// Sleeps coarsely, then yields until `deadline`. Returns immediately if
/// the deadline has passed.
pub fn sleep_until(deadline: Instant) {
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > SPIN_WINDOW {
            std::thread::sleep(left - SPIN_WINDOW);
        } else {
            std::thread::yield_now();
        }
    }
}

/// Lateness of tick starts relative to their deadlines.
#[derive(Clone, Debug, Default)]
pub struct JitterLog {
    samples: Vec<Duration>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct JitterStats {
    pub ticks: usize,
    /// s
    pub p50: f64,
    /// s
    pub p99: f64,
    /// s
    pub max: f64,
}

impl JitterLog {
    pub fn record(&mut self, late: Duration) {
        self.samples.push(late);
    }

    pub fn stats(&self) -> JitterStats {
        if self.samples.is_empty() {
            return JitterStats::default();
        }
        let mut s: Vec<f64> = self.samples.iter().map(Duration::as_secs_f64).collect();
        s.sort_by(f64::total_cmp);
        // Nearest-rank percentile.
        let rank = |q: f64| s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        JitterStats {
            ticks: s.len(),
            p50: rank(0.5),
            p99: rank(0.99),
            max: s[s.len() - 1],
        }
    }
}
