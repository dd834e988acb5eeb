//! Equation of motion of the levitated bead:
//!
//! ```text
//! ẋ = v
//! v̇ = (F_a(x − x_trap) − m·c·v) / m
//! ```
//!
//! `F_a` is either the linearized trap force `−b ⊙ (x − x_trap)` or the full
//! radiation force of an [`AcousticField`] translated so that its trap sits
//! at `x_trap`. The drag constant `c` is a per-mass rate in 1/s.

mod integrator;
mod trajectory;

pub use integrator::{step, IntegratorConfig};
pub use trajectory::{simulate_trajectory, write_trajectory_csv, TrajectorySample, TrapSchedule};

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::acoustic_field::{AcousticError, AcousticField, PotentialField};
use crate::geometry::{Axis, LevitationVolume, Vec3};

/// Particles this far outside the levitation volume are considered lost.
pub const ESCAPE_MARGIN: f64 = 0.01;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("invalid trap model: {0}")]
    InvalidModel(String),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("state is not finite at t = {0} s")]
    NonFinite(f64),
    #[error(
        "step size underflow at t = {time:.6} s ({step:.3e} s) driven by the {axis} {quantity}"
    )]
    StepUnderflow {
        axis: Axis,
        quantity: &'static str,
        time: f64,
        step: f64,
    },
    #[error("trap schedule starts at {start} s, after the simulation start {needed} s")]
    ScheduleGap { start: f64, needed: f64 },
    #[error("invalid trap schedule: {0}")]
    InvalidSchedule(String),
    #[error("acoustic force failed at t = {time} s: {source}")]
    Force {
        time: f64,
        #[source]
        source: AcousticError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DynamicsError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// s
    pub time: f64,
    /// Set once the bead leaves the volume plus [`ESCAPE_MARGIN`]; never cleared.
    #[serde(default)]
    pub escaped: bool,
}

impl ParticleState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            time: 0.0,
            escaped: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.velocity.iter())
            .all(|c| c.is_finite())
            && self.time.is_finite()
    }
}

/// An acoustic field together with the position of its trap.
#[derive(Clone, Debug)]
pub struct FieldTrap {
    pub field: AcousticField,
    pub center: Vec3,
}

#[derive(Clone, Debug, Default)]
pub enum ForceSource {
    #[default]
    Linear,
    FullField(Arc<FieldTrap>),
}

#[derive(Clone, Debug)]
pub struct TrapModel {
    /// kg
    pub mass: f64,
    /// Per-mass drag rate, 1/s (`F_drag = m·c·v`).
    pub drag: f64,
    /// Linear stiffness per axis, N/m.
    pub stiffness: Vec3,
    pub source: ForceSource,
    pub gravity: bool,
    pub escape_volume: Option<LevitationVolume>,
}

impl TrapModel {
    /// 2 mm EPS bead in the prototype trap: m = 1.05e-7 kg, c = 9.42 1/s,
    /// b = [0.016, 0.26, 0.011] N/m.
    pub fn prototype() -> Self {
        Self {
            mass: 1.05e-7,
            drag: 9.42,
            stiffness: Vec3::new(0.016, 0.26, 0.011),
            source: ForceSource::Linear,
            gravity: false,
            escape_volume: Some(LevitationVolume::prototype()),
        }
    }

    pub fn with_drag(mut self, drag: f64) -> Self {
        self.drag = drag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(DynamicsError::InvalidModel(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !(self.drag.is_finite() && self.drag >= 0.0) {
            return Err(DynamicsError::InvalidModel(format!(
                "drag must be non-negative, got {}",
                self.drag
            )));
        }
        if matches!(self.source, ForceSource::Linear)
            && !self.stiffness.iter().all(|b| b.is_finite() && *b > 0.0)
        {
            return Err(DynamicsError::InvalidModel(format!(
                "linear trap needs positive stiffness, got {:?}",
                self.stiffness.as_slice()
            )));
        }
        Ok(())
    }

    /// Undamped angular frequency along `axis`, rad/s.
    pub fn natural_frequency(&self, axis: Axis) -> f64 {
        (self.stiffness[axis.index()] / self.mass).sqrt()
    }
}

impl Default for TrapModel {
    fn default() -> Self {
        Self::prototype()
    }
}

fn acoustic_force(state: &ParticleState, trap: &Vec3, model: &TrapModel) -> Result<Vec3> {
    match &model.source {
        ForceSource::Linear => Ok(-model.stiffness.component_mul(&(state.position - trap))),
        ForceSource::FullField(ft) => {
            let point = ft.center + (state.position - trap);
            if state.escaped || !ft.field.volume().contains(&point) {
                return Ok(Vec3::zeros());
            }
            ft.field
                .force(&point)
                .map_err(|source| DynamicsError::Force {
                    time: state.time,
                    source,
                })
        }
    }
}

/// Net force on the bead, N. External forces are zero and gravity is left
/// out unless the model enables it.
pub fn net_force(state: &ParticleState, trap: &Vec3, model: &TrapModel) -> Result<Vec3> {
    let mut f = acoustic_force(state, trap, model)? - state.velocity * (model.mass * model.drag);
    if model.gravity {
        f.y -= model.mass * GRAVITY;
    }
    Ok(f)
}

/// `½m|v|² + ½Σ bᵢ(xᵢ − trapᵢ)²`, J.
pub fn mechanical_energy(state: &ParticleState, trap: &Vec3, model: &TrapModel) -> f64 {
    let d = state.position - trap;
    0.5 * model.mass * state.velocity.norm_squared()
        + 0.5
            * (0..3)
                .map(|i| model.stiffness[i] * d[i] * d[i])
                .sum::<f64>()
}
