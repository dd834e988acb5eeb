//! Simulator for ultrasonic levitation interfaces.
//!
//! The crate is split along the lines of the physical system it models:
//!
//! * [`acoustic_field`] evaluates the pressure field of two opposed phased
//!   arrays, the Gor'kov potential of a small bead in that field, and the
//!   radiation force and trap shape derived from it.
//! * [`particle_dynamics`] integrates the bead's equation of motion in a
//!   trap with an adaptive Dormand–Prince 5(4) integrator.
//! * [`sim_server`] is the real-time half of the simulator: a 90 Hz tick
//!   loop fed by a latest-wins command mailbox over UDP or WebSocket, with
//!   CSV session recording and replay.
//! * [`experiments`] holds the Fitts' law pointing harness and its analysis.
//! * [`games`] implements BeadBounce and LeviShooter as tick-driven state
//!   machines.

pub mod acoustic_field;
pub mod config;
pub mod experiments;
pub mod games;
pub mod geometry;
pub mod particle_dynamics;
pub mod sim_server;

pub use geometry::{Axis, LevitationVolume, Vec3};
