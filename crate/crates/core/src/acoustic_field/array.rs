use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::{AcousticError, Result};
use crate::geometry::{LevitationVolume, Vec3};

pub const SPEED_OF_SOUND_AIR: f64 = 343.0;

/// One circular piston emitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transducer {
    pub position: Vec3,
    /// Unit vector along the emitting axis.
    pub normal: Vec3,
    /// Emission phase in `[0, 2π)`.
    pub phase: f64,
    /// On-axis pressure at 1 m, Pa·m.
    pub amplitude: f64,
}

impl Transducer {
    pub fn new(position: Vec3, normal: Vec3, phase: f64, amplitude: f64) -> Result<Self> {
        let t = Self {
            position,
            normal,
            phase,
            amplitude,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(AcousticError::InvalidArray(format!(
                "transducer normal has length {}",
                self.normal.norm()
            )));
        }
        if !(0.0..TAU).contains(&self.phase) {
            return Err(AcousticError::InvalidArray(format!(
                "phase {} outside [0, 2π)",
                self.phase
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(AcousticError::InvalidArray(format!(
                "amplitude {} must be positive",
                self.amplitude
            )));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(AcousticError::InvalidArray(
                "non-finite transducer position".into(),
            ));
        }
        Ok(())
    }
}

/// Layout of two opposed rectangular grids facing each other along y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayGeometry {
    /// Emitters per row, along x.
    pub columns: usize,
    /// Emitters per column, along z.
    pub rows: usize,
    /// Centre-to-centre spacing, m.
    pub pitch: f64,
    /// Distance between the two grid planes, m.
    pub separation: f64,
    /// Hz
    pub frequency: f64,
    /// Piston radius used for the directivity, m.
    pub emitter_radius: f64,
    /// Common emitter amplitude, Pa·m. Usually replaced by calibration.
    pub amplitude: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            columns: 14,
            rows: 9,
            pitch: 0.01,
            separation: 0.16,
            frequency: 40e3,
            emitter_radius: 4.5e-3,
            amplitude: 1.0,
        }
    }
}

/// Ordered set of emitters. For the opposed-grid layout the first half is
/// the bottom grid (normals +y) and the second half the top grid (normals −y).
#[derive(Clone, Debug, PartialEq)]
pub struct TransducerArray {
    transducers: Vec<Transducer>,
    frequency: f64,
    sound_speed: f64,
    pitch: f64,
    emitter_radius: f64,
    volume: LevitationVolume,
    focus: Option<Vec3>,
}

impl TransducerArray {
    /// Builds the opposed-grid array with all phases zero.
    pub fn opposed_grids(
        geometry: &ArrayGeometry,
        sound_speed: f64,
        volume: LevitationVolume,
    ) -> Result<Self> {
        let ArrayGeometry {
            columns,
            rows,
            pitch,
            separation,
            frequency,
            emitter_radius,
            amplitude,
        } = *geometry;
        if columns == 0 || rows == 0 {
            return Err(AcousticError::InvalidArray(
                "grid must have at least one emitter".into(),
            ));
        }
        if !(pitch > 0.0 && separation > 0.0 && emitter_radius > 0.0) {
            return Err(AcousticError::InvalidArray(
                "pitch, separation and emitter radius must be positive".into(),
            ));
        }
        let center = volume.center();
        let mut transducers = Vec::with_capacity(2 * columns * rows);
        for (plane_y, normal) in [
            (-separation / 2.0, Vec3::y()),
            (separation / 2.0, -Vec3::y()),
        ] {
            for i in 0..columns {
                for j in 0..rows {
                    let x = (i as f64 - (columns as f64 - 1.0) / 2.0) * pitch;
                    let z = (j as f64 - (rows as f64 - 1.0) / 2.0) * pitch;
                    let position = center + Vec3::new(x, plane_y, z);
                    transducers.push(Transducer::new(position, normal, 0.0, amplitude)?);
                }
            }
        }
        let array = Self::from_transducers(transducers, frequency, sound_speed, volume)?
            .with_layout(pitch, emitter_radius);
        array.validate_opposed(columns * rows)?;
        Ok(array)
    }

    /// Arbitrary emitter set. Only per-emitter invariants are checked.
    pub fn from_transducers(
        transducers: Vec<Transducer>,
        frequency: f64,
        sound_speed: f64,
        volume: LevitationVolume,
    ) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(AcousticError::InvalidArray(format!(
                "frequency {frequency} must be positive"
            )));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(AcousticError::InvalidArray(format!(
                "sound speed {sound_speed} must be positive"
            )));
        }
        if !volume.is_valid() {
            return Err(AcousticError::InvalidArray(
                "levitation volume is empty".into(),
            ));
        }
        for t in &transducers {
            t.validate()?;
        }
        Ok(Self {
            transducers,
            frequency,
            sound_speed,
            pitch: 0.0,
            emitter_radius: 4.5e-3,
            volume,
            focus: None,
        })
    }

    pub fn with_layout(mut self, pitch: f64, emitter_radius: f64) -> Self {
        self.pitch = pitch;
        self.emitter_radius = emitter_radius;
        self
    }

    /// Checks the two-opposed-grids invariants: `2 × per_grid` emitters and
    /// antiparallel mean normals of the two halves.
    pub fn validate_opposed(&self, per_grid: usize) -> Result<()> {
        if self.transducers.len() != 2 * per_grid {
            return Err(AcousticError::InvalidArray(format!(
                "expected {} emitters, found {}",
                2 * per_grid,
                self.transducers.len()
            )));
        }
        let (bottom, top) = self.transducers.split_at(per_grid);
        let mean = |ts: &[Transducer]| {
            ts.iter()
                .fold(Vec3::zeros(), |acc, t| acc + t.normal)
                .normalize()
        };
        let angle = mean(bottom).dot(&mean(top)).clamp(-1.0, 1.0).acos();
        if (PI - angle).abs() > 1e-6 {
            return Err(AcousticError::InvalidArray(format!(
                "grids are not facing each other (normals {angle:.6} rad apart)"
            )));
        }
        Ok(())
    }

    pub fn transducers(&self) -> &[Transducer] {
        &self.transducers
    }

    pub fn len(&self) -> usize {
        self.transducers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transducers.is_empty()
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn emitter_radius(&self) -> f64 {
        self.emitter_radius
    }

    pub fn volume(&self) -> &LevitationVolume {
        &self.volume
    }

    /// Point the phases were last focused on, if any.
    pub fn focus(&self) -> Option<Vec3> {
        self.focus
    }

    pub fn wavenumber(&self) -> f64 {
        TAU * self.frequency / self.sound_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.frequency
    }

    /// Sets every emitter to the same amplitude (Pa·m).
    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(AcousticError::InvalidArray(format!(
                "amplitude {amplitude} must be positive"
            )));
        }
        for t in &mut self.transducers {
            t.amplitude = amplitude;
        }
        Ok(self)
    }

    /// Common amplitude, assuming all emitters share one (as after calibration).
    pub fn amplitude(&self) -> f64 {
        self.transducers.first().map_or(0.0, |t| t.amplitude)
    }

    pub fn with_phases(mut self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.transducers.len() {
            return Err(AcousticError::InvalidArray(format!(
                "{} phases for {} emitters",
                phases.len(),
                self.transducers.len()
            )));
        }
        for (t, &p) in self.transducers.iter_mut().zip(phases) {
            t.phase = p;
            t.validate()?;
        }
        self.focus = None;
        Ok(self)
    }

    /// Sets the phases that focus every emitter on `focus`.
    pub fn focused_at(self, focus: Vec3) -> Result<Self> {
        let phases = compute_focus_phases(&self, &focus)?;
        let mut array = self.with_phases(&phases)?;
        array.focus = Some(focus);
        Ok(array)
    }

    /// Mirror image of the array across the plane `x = volume centre`.
    pub fn mirrored_x(&self) -> Self {
        let cx = self.volume.center().x;
        let mut out = self.clone();
        for t in &mut out.transducers {
            t.position.x = 2.0 * cx - t.position.x;
            t.normal.x = -t.normal.x;
        }
        out.focus = self.focus.map(|f| Vec3::new(2.0 * cx - f.x, f.y, f.z));
        out
    }
}

/// Phase per emitter so that all wavefronts arrive at `focus` in phase:
/// `φ = −k·|x_focus − x_emitter| mod 2π`.
pub fn compute_focus_phases(array: &TransducerArray, focus: &Vec3) -> Result<Vec<f64>> {
    if !array.volume().strictly_contains(focus) {
        return Err(AcousticError::OutOfBounds(*focus));
    }
    let k = array.wavenumber();
    Ok(array
        .transducers()
        .iter()
        .map(|t| wrap_phase(-k * (focus - t.position).norm()))
        .collect())
}

fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}
