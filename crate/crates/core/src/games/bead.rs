use serde::{Deserialize, Serialize};

use super::unit;
use crate::geometry::{Axis, LevitationVolume, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallisticBead {
    pub position: Vec3,
    /// Unit vector.
    pub direction: Vec3,
    /// m/s
    pub speed: f64,
}

impl BallisticBead {
    /// Normalizes `direction`; a zero direction leaves the bead at rest along +x.
    pub fn new(position: Vec3, direction: Vec3, speed: f64) -> Self {
        Self {
            position,
            direction: unit(&direction).unwrap_or(Vec3::x()),
            speed: speed.max(0.0),
        }
    }

    pub fn velocity(&self) -> Vec3 {
        self.direction * self.speed
    }
}

/// Moves the bead for `dt` seconds, folding the path back at the walls.
/// Returns the walls that were hit, one entry per contact.
pub fn advance_bead(
    bead: &BallisticBead,
    dt: f64,
    volume: &LevitationVolume,
) -> (BallisticBead, Vec<Axis>) {
    let mut out = *bead;
    let mut contacts = Vec::new();
    let mut p = bead.position + bead.velocity() * dt;
    for axis in Axis::ALL {
        let i = axis.index();
        let (lo, hi) = (volume.min[i], volume.max[i]);
        // A single fold suffices unless the step spans the whole box.
        for _ in 0..64 {
            if p[i] > hi {
                p[i] = 2.0 * hi - p[i];
            } else if p[i] < lo {
                p[i] = 2.0 * lo - p[i];
            } else {
                break;
            }
            out.direction[i] = -out.direction[i];
            contacts.push(axis);
        }
        p[i] = p[i].clamp(lo, hi);
    }
    out.position = p;
    (out, contacts)
}
