use serde::Serialize;
use std::io::Write;

use super::integrator::{integrate, phase_to_state, start_phase};
use super::{DynamicsError, IntegratorConfig, ParticleState, Result, TrapModel};
use crate::geometry::Vec3;

/// Time-indexed trap positions, linearly interpolated between knots and
/// held constant after the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapSchedule {
    knots: Vec<(f64, Vec3)>,
}

impl TrapSchedule {
    pub fn new(knots: Vec<(f64, Vec3)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(DynamicsError::InvalidSchedule("no knots".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(DynamicsError::InvalidSchedule(
                "knot times must be strictly increasing".into(),
            ));
        }
        if knots
            .iter()
            .any(|(t, p)| !t.is_finite() || !p.iter().all(|c| c.is_finite()))
        {
            return Err(DynamicsError::InvalidSchedule("non-finite knot".into()));
        }
        Ok(Self { knots })
    }

    pub fn constant(position: Vec3) -> Self {
        Self {
            knots: vec![(0.0, position)],
        }
    }

    pub fn start(&self) -> f64 {
        self.knots[0].0
    }

    pub fn knots(&self) -> &[(f64, Vec3)] {
        &self.knots
    }

    pub fn at(&self, t: f64) -> Vec3 {
        let i = self.knots.partition_point(|(kt, _)| *kt <= t);
        if i == 0 {
            return self.knots[0].1;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].1;
        }
        let (t0, p0) = self.knots[i - 1];
        let (t1, p1) = self.knots[i];
        p0 + (p1 - p0) * ((t - t0) / (t1 - t0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub state: ParticleState,
    pub trap: Vec3,
}

/// Integrates from `initial` for `duration` seconds and returns samples at
/// `sample_rate` Hz, starting with the initial state. Integration restarts
/// at every sample time and schedule knot so the trap path is smooth inside
/// each integration segment. The result is a deterministic function of the
/// inputs.
pub fn simulate_trajectory(
    initial: &ParticleState,
    schedule: &TrapSchedule,
    model: &TrapModel,
    config: &IntegratorConfig,
    duration: f64,
    sample_rate: f64,
) -> Result<Vec<TrajectorySample>> {
    model.validate()?;
    config.validate()?;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(DynamicsError::InvalidStep(duration));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(DynamicsError::InvalidStep(sample_rate));
    }
    if !initial.is_finite() {
        return Err(DynamicsError::NonFinite(initial.time));
    }
    let t0 = initial.time;
    if schedule.start() > t0 {
        return Err(DynamicsError::ScheduleGap {
            start: schedule.start(),
            needed: t0,
        });
    }
    let n_samples = (duration * sample_rate + 1e-9).floor() as usize;
    let sample_time = |k: usize| t0 + k as f64 / sample_rate;
    let t_end = sample_time(n_samples);

    let mut samples = Vec::with_capacity(n_samples + 1);
    samples.push(TrajectorySample {
        state: *initial,
        trap: schedule.at(t0),
    });
    let mut knots = schedule
        .knots()
        .iter()
        .map(|(t, _)| *t)
        .filter(|t| *t > t0 && *t < t_end)
        .peekable();
    let mut state = *initial;
    let trap_at = |t: f64| schedule.at(t);
    for k in 1..=n_samples {
        let target = sample_time(k);
        while let Some(&kt) = knots.peek() {
            if kt >= target {
                break;
            }
            state = advance(&state, kt, &trap_at, model, config)?;
            knots.next();
        }
        state = advance(&state, target, &trap_at, model, config)?;
        samples.push(TrajectorySample {
            state,
            trap: schedule.at(target),
        });
    }
    Ok(samples)
}

fn advance(
    state: &ParticleState,
    t1: f64,
    trap_at: &dyn Fn(f64) -> Vec3,
    model: &TrapModel,
    config: &IntegratorConfig,
) -> Result<ParticleState> {
    if t1 <= state.time {
        return Ok(*state);
    }
    let y = integrate(
        start_phase(state),
        state.time,
        t1,
        trap_at,
        model,
        state.escaped,
        config,
    )?;
    Ok(phase_to_state(&y, t1, state.escaped, model))
}

#[derive(Serialize)]
struct TrajectoryRow {
    t_s: f64,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    trap_x: f64,
    trap_y: f64,
    trap_z: f64,
}

/// CSV with columns `t_s, x_m, y_m, z_m, vx, vy, vz, trap_x, trap_y, trap_z`.
pub fn write_trajectory_csv<W: Write>(samples: &[TrajectorySample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        let (p, v) = (s.state.position, s.state.velocity);
        w.serialize(TrajectoryRow {
            t_s: s.state.time,
            x_m: p.x,
            y_m: p.y,
            z_m: p.z,
            vx: v.x,
            vy: v.y,
            vz: v.z,
            trap_x: s.trap.x,
            trap_y: s.trap.y,
            trap_z: s.trap.z,
        })?;
    }
    w.flush()?;
    Ok(())
}
