//! BeadBounce and LeviShooter as deterministic, tick-driven state machines.
//!
//! Bead motion in both games is kinematic: straight lines at constant
//! speed with specular wall reflections. The running game sets the trap to
//! the bead position each tick, so the simulated particle follows it.

mod bead;
mod bead_bounce;
mod levi_shooter;
mod runtime;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

pub use bead::{advance_bead, BallisticBead};
pub use bead_bounce::{bead_bounce_step, BeadBounceConfig, BounceOutcome, RacketPose};
pub use levi_shooter::{
    aim_feedback, levi_shooter_step, ray_hits_sphere, GunPose, LeviShooterConfig, ShotOutcome,
};
pub use runtime::{GameConfig, GameRuntime, SessionSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    BeadBounce,
    LeviShooter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameState {
    Running,
    Over,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GameEvent {
    Bounce,
    RacketHit,
    ShotHit,
    ShotMiss,
    DangerZone,
    Cooldown,
}

impl GameEvent {
    pub fn name(self) -> &'static str {
        match self {
            GameEvent::Bounce => "bounce",
            GameEvent::RacketHit => "racket_hit",
            GameEvent::ShotHit => "shot_hit",
            GameEvent::ShotMiss => "shot_miss",
            GameEvent::DangerZone => "danger_zone",
            GameEvent::Cooldown => "cooldown",
        }
    }
}

impl std::fmt::Display for GameEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Score-keeping state shared by both games.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSession {
    pub kind: GameKind,
    /// Racket hits in BeadBounce, target hits in LeviShooter.
    pub score: u32,
    pub miss_streak: u32,
    /// Seconds until the gun can fire again.
    pub cooldown: f64,
    /// Simulated seconds since the round started.
    pub elapsed: f64,
    pub state: GameState,
    /// Speed increments currently applied (LeviShooter).
    pub level: u32,
    /// Increments taken back after miss streaks.
    pub reverts: u32,
}

impl GameSession {
    pub fn new(kind: GameKind) -> Self {
        Self {
            kind,
            score: 0,
            miss_streak: 0,
            cooldown: 0.0,
            elapsed: 0.0,
            state: GameState::Running,
            level: 0,
            reverts: 0,
        }
    }

    pub fn is_over(&self) -> bool {
        self.state == GameState::Over
    }
}

/// Normalizes `v`, or returns `None` for a zero or non-finite vector.
pub(crate) fn unit(v: &Vec3) -> Option<Vec3> {
    let n = v.norm();
    (n.is_finite() && n > 0.0).then(|| v / n)
}
