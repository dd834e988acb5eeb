use serde::{Deserialize, Serialize};

use crate::geometry::{LevitationVolume, Vec3};

/// Control-to-display mapping from tracked input to trap position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainConfig {
    /// Input distance per unit of trap distance.
    pub ratio: f64,
    pub control_origin: Vec3,
    pub display_origin: Vec3,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            control_origin: Vec3::zeros(),
            display_origin: Vec3::zeros(),
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(format!("C:D ratio must be positive, got {}", self.ratio));
        }
        if !(self.control_origin.iter().chain(self.display_origin.iter())).all(|v| v.is_finite()) {
            return Err("gain origins must be finite".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainOutput {
    pub trap: Vec3,
    /// The mapped point lay outside the volume and was moved to its boundary.
    pub clamped: bool,
}

pub fn apply_cd_gain(input: &Vec3, gain: &GainConfig, volume: &LevitationVolume) -> GainOutput {
    let mapped = gain.display_origin + (input - gain.control_origin) / gain.ratio;
    let (trap, clamped) = volume.clamp(&mapped);
    GainOutput { trap, clamped }
}
