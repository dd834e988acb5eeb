//! Acoustic pressure, Gor'kov potential and radiation force of a phased
//! transducer array, plus trap characterization on top of them.
//!
//! Every evaluation here is a pure function of immutable inputs, so fields
//! can be shared across threads freely.

mod array;
mod medium;
mod potential;
mod pressure;
mod profile;
mod trap;

pub use array::{
    compute_focus_phases, ArrayGeometry, Transducer, TransducerArray, SPEED_OF_SOUND_AIR,
};
pub use medium::{GorkovCoefficients, MediumAndParticle};
pub use potential::{
    acoustic_force, gorkov_potential, AcousticField, PotentialField, SyntheticPotential,
};
pub use pressure::{complex_pressure, piston_directivity, MIN_EMITTER_DISTANCE};
pub use profile::{force_profile, write_force_profile_csv, ForceProfileRow};
pub use trap::{
    calibrate_amplitude, characterize_trap, find_trap_center, linearize_trap,
    linearize_trap_in_window, AxisFit, AxisProfile, CalibratedTrap, LinearTrap,
    TrapCharacterization, CHARACTERIZATION_SCAN_STEP, FIT_WINDOW_FRACTION,
};

use crate::geometry::{Axis, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum AcousticError {
    #[error("point ({:.4}, {:.4}, {:.4}) m lies outside the levitation volume", .0.x, .0.y, .0.z)]
    OutOfBounds(Vec3),
    #[error("point is {distance:.2e} m from emitter {index}; pressure is singular there")]
    Singularity { index: usize, distance: f64 },
    #[error("invalid transducer array: {0}")]
    InvalidArray(String),
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("calibration target must be a positive force, got {0} N")]
    InvalidTarget(f64),
    #[error(
        "degenerate trap: fitted stiffness along {axis} is {stiffness:.3e} N/m (not restoring)"
    )]
    DegenerateTrap { axis: Axis, stiffness: f64 },
    #[error("no potential minimum found near ({:.4}, {:.4}, {:.4}) m", .0.x, .0.y, .0.z)]
    NoTrap(Vec3),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AcousticError> = std::result::Result<T, E>;
