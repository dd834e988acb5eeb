use serde::{Deserialize, Serialize};

use super::{advance_bead, BallisticBead, GameEvent, GameSession};
use crate::geometry::{LevitationVolume, Vec3};

/// Cooldowns within this many seconds of zero count as expired, so that
/// repeated subtraction of a tick length lands on zero.
const COOLDOWN_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GunPose {
    pub origin: Vec3,
    /// Unit vector.
    pub direction: Vec3,
    /// Fire on this tick.
    pub trigger: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeviShooterConfig {
    /// m/s
    pub initial_speed: f64,
    /// m/s per hit
    pub increment: f64,
    /// s
    pub cooldown: f64,
    pub miss_limit: u32,
    /// m
    pub bead_radius: f64,
    /// Added to the bead radius for ray tests, m.
    pub aim_margin: f64,
    /// A miss streak drops back to the initial speed instead of one step.
    pub full_reset: bool,
    pub initial_direction: Vec3,
    /// Start point; defaults to the volume centre.
    pub start: Option<Vec3>,
}

impl Default for LeviShooterConfig {
    fn default() -> Self {
        Self {
            initial_speed: 0.05,
            increment: 0.001,
            cooldown: 2.0,
            miss_limit: 10,
            bead_radius: 0.001,
            aim_margin: 0.004,
            full_reset: false,
            initial_direction: Vec3::new(0.7, 0.4, -0.59),
            start: None,
        }
    }
}

impl LeviShooterConfig {
    pub fn hit_radius(&self) -> f64 {
        self.bead_radius + self.aim_margin
    }

    pub fn speed(&self, level: u32) -> f64 {
        self.initial_speed + self.increment * level as f64
    }

    pub fn initial_bead(&self, volume: &LevitationVolume) -> BallisticBead {
        BallisticBead::new(
            self.start.unwrap_or_else(|| volume.center()),
            self.initial_direction,
            self.initial_speed,
        )
    }
}

/// Closed test of the half-line `origin + t·direction` (t ≥ 0) against a sphere.
pub fn ray_hits_sphere(origin: &Vec3, direction: &Vec3, center: &Vec3, radius: f64) -> bool {
    let Some(d) = super::unit(direction) else {
        return false;
    };
    let w = center - origin;
    let t = w.dot(&d);
    let closest = if t <= 0.0 { w } else { w - d * t };
    closest.norm_squared() <= radius * radius
}

/// Whether the gun currently points at the bead.
pub fn aim_feedback(bead: &BallisticBead, gun: &GunPose, config: &LeviShooterConfig) -> bool {
    ray_hits_sphere(
        &gun.origin,
        &gun.direction,
        &bead.position,
        config.hit_radius(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotOutcome {
    pub bead: BallisticBead,
    pub session: GameSession,
    pub events: Vec<GameEvent>,
}

pub fn levi_shooter_step(
    bead: &BallisticBead,
    gun: Option<&GunPose>,
    dt: f64,
    session: &GameSession,
    volume: &LevitationVolume,
    config: &LeviShooterConfig,
) -> ShotOutcome {
    let mut s = *session;
    let mut b = *bead;
    let mut events = Vec::new();
    s.cooldown = (s.cooldown - dt).max(0.0);
    if s.cooldown <= COOLDOWN_EPS {
        s.cooldown = 0.0;
    }
    if let Some(gun) = gun.filter(|g| g.trigger) {
        if s.cooldown > 0.0 {
            events.push(GameEvent::Cooldown);
        } else if aim_feedback(&b, gun, config) {
            s.score += 1;
            s.level += 1;
            s.miss_streak = 0;
            s.cooldown = config.cooldown;
            events.push(GameEvent::ShotHit);
        } else {
            s.miss_streak += 1;
            events.push(GameEvent::ShotMiss);
            if s.miss_streak >= config.miss_limit {
                s.miss_streak = 0;
                if config.full_reset {
                    s.reverts += s.level;
                    s.level = 0;
                } else if s.level > 0 {
                    s.level -= 1;
                    s.reverts += 1;
                }
            }
        }
        b.speed = config.speed(s.level);
    }
    let (next, walls) = advance_bead(&b, dt, volume);
    events.extend(walls.iter().map(|_| GameEvent::Bounce));
    s.elapsed += dt;
    ShotOutcome {
        bead: next,
        session: s,
        events,
    }
}
