//! JSON configuration documents.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::acoustic_field::{
    calibrate_amplitude, AcousticError, AcousticField, ArrayGeometry, CalibratedTrap,
    MediumAndParticle, TransducerArray,
};
use crate::geometry::{LevitationVolume, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// How the emitter amplitude is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeSetting {
    /// Use this amplitude (Pa·m) as is.
    Fixed(f64),
    /// Scale the amplitude until the peak vertical restoring force is this many newtons.
    CalibrateMaxYForce(f64),
}

impl Default for AmplitudeSetting {
    fn default() -> Self {
        AmplitudeSetting::CalibrateMaxYForce(2.2e-4)
    }
}

/// Array, medium and trap placement for the acoustic model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    pub geometry: ArrayGeometry,
    pub medium: MediumAndParticle,
    pub volume: LevitationVolume,
    pub amplitude: AmplitudeSetting,
    /// Focus point of both grids; defaults to the volume centre.
    pub focus: Option<Vec3>,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry::default(),
            medium: MediumAndParticle::default(),
            volume: LevitationVolume::prototype(),
            amplitude: AmplitudeSetting::default(),
            focus: None,
        }
    }
}

impl ArrayConfig {
    /// Focused field at the configured geometry amplitude (no calibration).
    pub fn field(&self) -> Result<AcousticField, AcousticError> {
        let array = TransducerArray::opposed_grids(
            &self.geometry,
            self.medium.sound_speed_air,
            self.volume,
        )?;
        let focus = self.focus.unwrap_or_else(|| self.volume.center());
        AcousticField::new(array.focused_at(focus)?, self.medium)
    }

    /// Field with the amplitude setting applied and its trap characterized.
    pub fn build(&self) -> Result<CalibratedTrap, AcousticError> {
        let field = self.field()?;
        match self.amplitude {
            AmplitudeSetting::CalibrateMaxYForce(target) => calibrate_amplitude(&field, target),
            AmplitudeSetting::Fixed(amplitude) => {
                let field = field.with_amplitude(amplitude)?;
                let focus = field
                    .array()
                    .focus()
                    .unwrap_or_else(|| self.volume.center());
                let center = crate::acoustic_field::find_trap_center(&field, &focus)?;
                let characterization = crate::acoustic_field::characterize_trap(&field, &center)?;
                Ok(CalibratedTrap {
                    field,
                    characterization,
                })
            }
        }
    }
}
