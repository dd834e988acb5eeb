use serde::{Deserialize, Serialize};

use super::{advance_bead, unit, BallisticBead, GameEvent};
use crate::geometry::{LevitationVolume, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RacketPose {
    pub center: Vec3,
    pub normal: Vec3,
    /// m
    pub radius: f64,
    /// m/s, from successive poses.
    #[serde(default = "Vec3::zeros")]
    pub velocity: Vec3,
}

impl RacketPose {
    pub const DEFAULT_RADIUS: f64 = 0.015;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeadBounceConfig {
    /// m/s
    pub initial_speed: f64,
    pub initial_direction: Vec3,
    /// Start point; defaults to the middle of the safe (left) half.
    pub start: Option<Vec3>,
    /// Fraction of racket velocity handed to the bead.
    pub momentum_transfer: f64,
}

impl Default for BeadBounceConfig {
    fn default() -> Self {
        Self {
            initial_speed: 0.09,
            initial_direction: Vec3::new(-0.6, 0.5, 0.62),
            start: None,
            momentum_transfer: 0.3,
        }
    }
}

impl BeadBounceConfig {
    pub fn initial_bead(&self, volume: &LevitationVolume) -> BallisticBead {
        let start = self
            .start
            .unwrap_or_else(|| volume.center() - Vec3::new(volume.size().x / 4.0, 0.0, 0.0));
        BallisticBead::new(start, self.initial_direction, self.initial_speed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BounceOutcome {
    pub bead: BallisticBead,
    pub events: Vec<GameEvent>,
    /// The bead crossed into the danger half; the round is over.
    pub danger: bool,
}

/// Where along the tick the bead crosses the racket disc, if it does.
fn racket_contact(bead: &BallisticBead, racket: &RacketPose, dt: f64) -> Option<(f64, Vec3)> {
    let n = unit(&racket.normal)?;
    if !(racket.radius > 0.0) {
        return None;
    }
    let b0 = bead.position;
    let b1 = b0 + bead.velocity() * dt;
    let c1 = racket.center;
    let c0 = c1 - racket.velocity * dt;
    let s0 = (b0 - c0).dot(&n);
    let s1 = (b1 - c1).dot(&n);
    // Starting on the plane does not count, so a bead just sent off the
    // disc is not struck again on the next tick.
    if s0 == 0.0 || (s1 != 0.0 && (s0 > 0.0) == (s1 > 0.0)) {
        return None;
    }
    let tau = s0 / (s0 - s1);
    let p = b0 + (b1 - b0) * tau;
    let c = c0 + (c1 - c0) * tau;
    let r = p - c;
    let in_plane = r - n * r.dot(&n);
    (in_plane.norm_squared() <= racket.radius * racket.radius).then_some((tau, p))
}

/// Reflects the bead about the racket normal and adds `kappa` times the
/// racket velocity.
fn racket_bounce(bead: &BallisticBead, racket: &RacketPose, kappa: f64) -> BallisticBead {
    let n = unit(&racket.normal).unwrap_or(Vec3::x());
    let d = bead.direction;
    let reflected = d - n * (2.0 * d.dot(&n));
    let push = racket.velocity * kappa;
    if push == Vec3::zeros() {
        return BallisticBead {
            position: bead.position,
            direction: unit(&reflected).unwrap_or(d),
            speed: bead.speed,
        };
    }
    let v = reflected * bead.speed + push;
    let speed = v.norm();
    BallisticBead {
        position: bead.position,
        direction: unit(&v).unwrap_or(reflected),
        speed,
    }
}

pub fn bead_bounce_step(
    bead: &BallisticBead,
    racket: Option<&RacketPose>,
    dt: f64,
    volume: &LevitationVolume,
    config: &BeadBounceConfig,
) -> BounceOutcome {
    let mut events = Vec::new();
    let mut current = *bead;
    let mut remaining = dt;
    if let Some((tau, point)) = racket.and_then(|r| racket_contact(bead, r, dt)) {
        current.position = point;
        current = racket_bounce(&current, racket.unwrap(), config.momentum_transfer);
        remaining = dt * (1.0 - tau);
        events.push(GameEvent::RacketHit);
    }
    let (next, walls) = advance_bead(&current, remaining, volume);
    events.extend(walls.iter().map(|_| GameEvent::Bounce));
    let boundary = volume.center().x;
    let danger = bead.position.x <= boundary && next.position.x > boundary;
    if danger {
        events.push(GameEvent::DangerZone);
    }
    BounceOutcome {
        bead: next,
        events,
        danger,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn volume() -> LevitationVolume {
        LevitationVolume::prototype()
    }

    fn racket_at(center: Vec3, normal: Vec3, velocity: Vec3) -> RacketPose {
        RacketPose {
            center,
            normal,
            radius: RacketPose::DEFAULT_RADIUS,
            velocity,
        }
    }

    #[test]
    fn still_racket_is_elastic() {
        let bead = BallisticBead::new(Vec3::new(-0.0305, 0.0, 0.0), Vec3::x(), 0.09);
        let racket = racket_at(Vec3::new(-0.03, 0.0, 0.0), -Vec3::x(), Vec3::zeros());
        let out = bead_bounce_step(
            &bead,
            Some(&racket),
            1.0 / 90.0,
            &volume(),
            &BeadBounceConfig::default(),
        );
        assert_eq!(out.events, vec![GameEvent::RacketHit]);
        assert_eq!(out.bead.direction, -Vec3::x());
        assert_eq!(out.bead.speed, 0.09);
    }

    #[test]
    fn moving_racket_transfers_momentum() {
        let bead = BallisticBead::new(Vec3::new(-0.0305, 0.0, 0.0), Vec3::x(), 0.09);
        let racket = racket_at(
            Vec3::new(-0.03, 0.0, 0.0),
            -Vec3::x(),
            Vec3::new(-0.5, 0.0, 0.0),
        );
        let out = bead_bounce_step(
            &bead,
            Some(&racket),
            1.0 / 90.0,
            &volume(),
            &BeadBounceConfig::default(),
        );
        assert_eq!(out.events, vec![GameEvent::RacketHit]);
        // |0.09·(−x) + 0.3·(−0.5 x)| = 0.24
        assert!((out.bead.speed - 0.24).abs() < 1e-15);
        assert_eq!(out.bead.direction, -Vec3::x());
    }

    #[test]
    fn ring_miss_outside_radius() {
        let bead = BallisticBead::new(Vec3::new(-0.0305, 0.016, 0.0), Vec3::x(), 0.09);
        let racket = racket_at(Vec3::new(-0.03, 0.0, 0.0), Vec3::x(), Vec3::zeros());
        let out = bead_bounce_step(
            &bead,
            Some(&racket),
            1.0 / 90.0,
            &volume(),
            &BeadBounceConfig::default(),
        );
        assert!(out.events.is_empty());
        assert_eq!(out.bead.direction, Vec3::x());
    }

    #[test]
    fn fast_racket_cannot_tunnel() {
        // Racket sweeps 10 cm in one tick through a nearly still bead.
        let bead = BallisticBead::new(Vec3::new(-0.03, 0.0, 0.0), Vec3::y(), 0.001);
        let racket = racket_at(
            Vec3::new(-0.06, 0.0, 0.0),
            Vec3::x(),
            Vec3::new(-9.0, 0.0, 0.0),
        );
        let out = bead_bounce_step(
            &bead,
            Some(&racket),
            1.0 / 90.0,
            &volume(),
            &BeadBounceConfig::default(),
        );
        assert_eq!(out.events, vec![GameEvent::RacketHit]);
        assert!(out.bead.velocity().x < 0.0);
    }

    #[test]
    fn degenerate_racket_is_ignored() {
        let bead = BallisticBead::new(Vec3::new(-0.0305, 0.0, 0.0), Vec3::x(), 0.09);
        let racket = racket_at(Vec3::new(-0.03, 0.0, 0.0), Vec3::zeros(), Vec3::zeros());
        let out = bead_bounce_step(
            &bead,
            Some(&racket),
            1.0 / 90.0,
            &volume(),
            &BeadBounceConfig::default(),
        );
        assert!(out.events.is_empty());
    }

    #[test]
    fn crossing_the_middle_ends_the_round() {
        let bead = BallisticBead::new(Vec3::new(-0.0005, 0.0, 0.0), Vec3::x(), 0.09);
        let out = bead_bounce_step(
            &bead,
            None,
            1.0 / 90.0,
            &volume(),
            &BeadBounceConfig::default(),
        );
        assert!(out.danger);
        assert_eq!(out.events, vec![GameEvent::DangerZone]);
    }

    #[test]
    fn default_start_is_in_the_safe_half() {
        let bead = BeadBounceConfig::default().initial_bead(&volume());
        assert!(bead.position.x < 0.0);
        assert_eq!(bead.speed, 0.09);
        assert!((bead.direction.norm() - 1.0).abs() < 1e-12);
    }
}
