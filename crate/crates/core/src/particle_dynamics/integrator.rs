//! Dormand–Prince 5(4) with local extrapolation and FSAL.

use serde::{Deserialize, Serialize};

use super::{net_force, DynamicsError, ParticleState, Result, TrapModel, ESCAPE_MARGIN};
use crate::geometry::{Axis, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    /// m
    pub abs_tol_position: f64,
    /// m/s
    pub abs_tol_velocity: f64,
    /// s
    pub max_step: f64,
    /// s
    pub min_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol_position: 1e-9,
            abs_tol_velocity: 1e-9,
            max_step: 1e-3,
            min_step: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.rel_tol)
            && positive(self.abs_tol_position)
            && positive(self.abs_tol_velocity))
        {
            return Err(DynamicsError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !(positive(self.min_step) && positive(self.max_step) && self.min_step <= self.max_step) {
            return Err(DynamicsError::InvalidConfig(format!(
                "need 0 < min_step ({}) <= max_step ({})",
                self.min_step, self.max_step
            )));
        }
        Ok(())
    }

    /// Same configuration with every tolerance divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol_position: self.abs_tol_position / factor,
            abs_tol_velocity: self.abs_tol_velocity / factor,
            ..*self
        }
    }
}

/// Position followed by velocity.
pub(super) type Phase = [f64; 6];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order solution minus embedded fourth-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn to_phase(s: &ParticleState) -> Phase {
    [
        s.position.x,
        s.position.y,
        s.position.z,
        s.velocity.x,
        s.velocity.y,
        s.velocity.z,
    ]
}

fn rhs(t: f64, y: &Phase, trap: &Vec3, model: &TrapModel, escaped: bool) -> Result<Phase> {
    let state = ParticleState {
        position: Vec3::new(y[0], y[1], y[2]),
        velocity: Vec3::new(y[3], y[4], y[5]),
        time: t,
        escaped,
    };
    let a = net_force(&state, trap, model)? / model.mass;
    Ok([y[3], y[4], y[5], a.x, a.y, a.z])
}

fn combine(y: &Phase, h: f64, k: &[Phase; 7], weights: &[f64], n: usize) -> Phase {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..n {
            acc += weights[j] * k[j][i];
        }
        *o += h * acc;
    }
    out
}

/// Largest `ωh` for which a step is non-expansive in the energy norm of
/// the damped linear oscillator. The stability polynomial reaches |R| = 1 on
/// the imaginary axis near 1.0.
const STABLE_OMEGA_STEP: f64 = 0.8;

/// Step cap that keeps the scheme energy-contractive for the stiffest axis
/// or the drag rate, whichever is faster. Also returns what sets the cap.
fn stability_limit(model: &TrapModel) -> (f64, Axis, &'static str) {
    let (axis, omega) = Axis::ALL
        .iter()
        .map(|a| (*a, model.natural_frequency(*a)))
        .fold(
            (Axis::X, 0.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    if model.drag > omega {
        (STABLE_OMEGA_STEP / model.drag, axis, "velocity")
    } else if omega > 0.0 {
        (STABLE_OMEGA_STEP / omega, axis, "position")
    } else {
        (f64::INFINITY, axis, "position")
    }
}

/// Integrates from `t0` to `t1` with the trap following `trap_at(t)`.
pub(super) fn integrate(
    y0: Phase,
    t0: f64,
    t1: f64,
    trap_at: &dyn Fn(f64) -> Vec3,
    model: &TrapModel,
    escaped: bool,
    config: &IntegratorConfig,
) -> Result<Phase> {
    let (limit, stiff_axis, quantity) = stability_limit(model);
    if limit < config.min_step {
        return Err(DynamicsError::StepUnderflow {
            axis: stiff_axis,
            quantity,
            time: t0,
            step: limit,
        });
    }
    let max_step = config.max_step.min(limit);
    let mut t = t0;
    let mut y = y0;
    let mut h = max_step.min(t1 - t0);
    let mut k = [[0.0; 6]; 7];
    k[0] = rhs(t, &y, &trap_at(t), model, escaped)?;
    let atol = [
        config.abs_tol_position,
        config.abs_tol_position,
        config.abs_tol_position,
        config.abs_tol_velocity,
        config.abs_tol_velocity,
        config.abs_tol_velocity,
    ];
    while t < t1 {
        let remaining = t1 - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        for s in 1..7 {
            let ts = t + C[s] * h;
            let ys = combine(&y, h, &k, &A[s], s);
            k[s] = rhs(ts, &ys, &trap_at(ts), model, escaped)?;
        }
        let y_new = combine(&y, h, &k, &A[6], 6);
        let mut err = 0.0f64;
        let mut worst = 0;
        for i in 0..6 {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let scale = atol[i] + config.rel_tol * y[i].abs().max(y_new[i].abs());
            let ratio = (e / scale).abs();
            if ratio > err {
                err = ratio;
                worst = i;
            }
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite(t));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k[0] = k[6];
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).min(max_step);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            if h < config.min_step {
                return Err(DynamicsError::StepUnderflow {
                    axis: Axis::ALL[worst % 3],
                    quantity: if worst < 3 { "position" } else { "velocity" },
                    time: t,
                    step: h,
                });
            }
        }
    }
    Ok(y)
}

pub(super) fn phase_to_state(
    y: &Phase,
    time: f64,
    escaped: bool,
    model: &TrapModel,
) -> ParticleState {
    let position = Vec3::new(y[0], y[1], y[2]);
    let escaped = escaped
        || model
            .escape_volume
            .is_some_and(|v| !v.contains_with_margin(&position, ESCAPE_MARGIN));
    ParticleState {
        position,
        velocity: Vec3::new(y[3], y[4], y[5]),
        time,
        escaped,
    }
}

pub(super) fn start_phase(state: &ParticleState) -> Phase {
    to_phase(state)
}

/// Advances `state` by `dt` with the trap held at `trap`.
pub fn step(
    state: &ParticleState,
    trap: &Vec3,
    model: &TrapModel,
    config: &IntegratorConfig,
    dt: f64,
) -> Result<ParticleState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite(state.time));
    }
    model.validate()?;
    config.validate()?;
    let trap = *trap;
    let y = integrate(
        to_phase(state),
        state.time,
        state.time + dt,
        &|_| trap,
        model,
        state.escaped,
        config,
    )?;
    Ok(phase_to_state(&y, state.time + dt, state.escaped, model))
}
