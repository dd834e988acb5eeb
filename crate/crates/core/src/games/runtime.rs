use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    aim_feedback, bead_bounce_step, levi_shooter_step, BallisticBead, BeadBounceConfig, GameEvent,
    GameKind, GameSession, GameState, GunPose, LeviShooterConfig, RacketPose,
};
use crate::geometry::{LevitationVolume, Vec3};
use crate::sim_server::{FrameObserver, TickContext};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub bead_bounce: BeadBounceConfig,
    pub levi_shooter: LeviShooterConfig,
}

/// End-of-session report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub game: GameKind,
    /// Racket hits (BeadBounce) or target hits (LeviShooter).
    pub score: u32,
    /// Simulated seconds the round ran; the BeadBounce result.
    pub elapsed_s: f64,
    pub racket_hits: u32,
    pub shots: u32,
    pub misses: u32,
    pub reverts: u32,
    /// Bead speed at the end, m/s.
    pub final_speed: f64,
    pub state: GameState,
}

/// Runs one game inside the tick loop: the trap follows the bead and game
/// events are appended to the frame's event column.
///
/// A gun message with `trigger` set is one press. Presses arriving within a
/// tick fire once.
pub struct GameRuntime {
    session: GameSession,
    bead: BallisticBead,
    config: GameConfig,
    volume: LevitationVolume,
    racket: Option<RacketPose>,
    racket_age: u32,
    gun: Option<GunPose>,
    summary: Arc<Mutex<SessionSummary>>,
}

impl GameRuntime {
    pub fn new(kind: GameKind, config: GameConfig, volume: LevitationVolume) -> Self {
        let bead = match kind {
            GameKind::BeadBounce => config.bead_bounce.initial_bead(&volume),
            GameKind::LeviShooter => config.levi_shooter.initial_bead(&volume),
        };
        let session = GameSession::new(kind);
        let summary = SessionSummary {
            game: kind,
            score: 0,
            elapsed_s: 0.0,
            racket_hits: 0,
            shots: 0,
            misses: 0,
            reverts: 0,
            final_speed: bead.speed,
            state: session.state,
        };
        Self {
            session,
            bead,
            config,
            volume,
            racket: None,
            racket_age: 0,
            gun: None,
            summary: Arc::new(Mutex::new(summary)),
        }
    }

    pub fn session(&self) -> &GameSession {
        &self.session
    }

    pub fn bead(&self) -> &BallisticBead {
        &self.bead
    }

    /// Shared view of the summary, updated every tick.
    pub fn summary_handle(&self) -> Arc<Mutex<SessionSummary>> {
        Arc::clone(&self.summary)
    }

    pub fn summary(&self) -> SessionSummary {
        *self.summary.lock().unwrap()
    }

    /// Latest racket pose, with velocity from the displacement since the
    /// previous pose. A racket with no new pose this tick is at rest.
    fn update_racket(&mut self, pose: Option<&RacketPose>, dt: f64) {
        self.racket_age += 1;
        match pose {
            Some(p) => {
                let mut p = *p;
                if let Some(prev) = self.racket {
                    p.velocity = (p.center - prev.center) / (dt * self.racket_age as f64);
                }
                self.racket = Some(p);
                self.racket_age = 0;
            }
            None => {
                if let Some(r) = self.racket.as_mut() {
                    r.velocity = Vec3::zeros();
                }
            }
        }
    }

    /// Advances the game by `dt` with the given inputs and returns its events.
    pub fn advance(
        &mut self,
        racket: Option<&RacketPose>,
        gun: Option<&GunPose>,
        dt: f64,
    ) -> Vec<GameEvent> {
        if self.session.is_over() {
            return Vec::new();
        }
        let events = match self.session.kind {
            GameKind::BeadBounce => {
                self.update_racket(racket, dt);
                let out = bead_bounce_step(
                    &self.bead,
                    self.racket.as_ref(),
                    dt,
                    &self.volume,
                    &self.config.bead_bounce,
                );
                self.bead = out.bead;
                self.session.elapsed += dt;
                let hits = out
                    .events
                    .iter()
                    .filter(|e| **e == GameEvent::RacketHit)
                    .count();
                self.session.score += hits as u32;
                if out.danger {
                    self.session.state = GameState::Over;
                }
                out.events
            }
            GameKind::LeviShooter => {
                if let Some(g) = gun {
                    self.gun = Some(*g);
                }
                let fire = gun.filter(|g| g.trigger);
                let out = levi_shooter_step(
                    &self.bead,
                    fire,
                    dt,
                    &self.session,
                    &self.volume,
                    &self.config.levi_shooter,
                );
                self.bead = out.bead;
                self.session = out.session;
                out.events
            }
        };
        let mut s = self.summary.lock().unwrap();
        s.score = self.session.score;
        s.elapsed_s = self.session.elapsed;
        s.reverts = self.session.reverts;
        s.final_speed = self.bead.speed;
        s.state = self.session.state;
        for e in &events {
            match e {
                GameEvent::RacketHit => s.racket_hits += 1,
                GameEvent::ShotHit => s.shots += 1,
                GameEvent::ShotMiss => {
                    s.shots += 1;
                    s.misses += 1;
                }
                _ => {}
            }
        }
        events
    }

    pub fn aiming(&self) -> bool {
        self.gun
            .as_ref()
            .is_some_and(|g| aim_feedback(&self.bead, g, &self.config.levi_shooter))
    }

    pub fn status_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.session.kind,
            "state": self.session.state,
            "score": self.session.score,
            "elapsed": self.session.elapsed,
            "speed": self.bead.speed,
            "cooldown": self.session.cooldown,
            "miss_streak": self.session.miss_streak,
            "level": self.session.level,
            "bead": self.bead.position,
            "aiming": self.aiming(),
            "danger_x": self.volume.center().x,
        })
    }
}

impl FrameObserver for GameRuntime {
    fn before_step(&mut self, ctx: &mut TickContext<'_>) {
        let events = self.advance(ctx.racket, ctx.gun, ctx.dt);
        ctx.target_hit |= events.contains(&GameEvent::ShotHit);
        ctx.events
            .extend(events.iter().map(|e| e.name().to_string()));
        ctx.trap = self.bead.position;
    }

    fn status(&self) -> Option<serde_json::Value> {
        Some(self.status_json())
    }
}
