use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{AcousticError, Result};

/// Properties of the host fluid and of the levitated bead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumAndParticle {
    /// m/s
    pub sound_speed_air: f64,
    /// kg/m³
    pub density_air: f64,
    /// m/s
    pub sound_speed_particle: f64,
    /// kg/m³
    pub density_particle: f64,
    /// m
    pub particle_radius: f64,
}

impl MediumAndParticle {
    /// Air at room temperature and a 2 mm expanded-polystyrene bead.
    pub fn eps_bead_in_air() -> Self {
        Self {
            sound_speed_air: 343.0,
            density_air: 1.18,
            sound_speed_particle: 2400.0,
            density_particle: 25.0,
            particle_radius: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sound_speed_air", self.sound_speed_air),
            ("density_air", self.density_air),
            ("sound_speed_particle", self.sound_speed_particle),
            ("density_particle", self.density_particle),
            ("particle_radius", self.particle_radius),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(AcousticError::InvalidMedium(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Warns when the bead is too large for the small-particle (Rayleigh) limit.
    pub fn check_small_particle(&self, frequency: f64) -> bool {
        let wavelength = self.sound_speed_air / frequency;
        let ok = self.particle_radius < wavelength / 10.0;
        static WARNED: std::sync::Once = std::sync::Once::new();
        if !ok {
            WARNED.call_once(|| {
            log::warn!(
                "particle radius {:.3e} m exceeds a tenth of the wavelength {:.3e} m; Gor'kov potential is inaccurate",
                self.particle_radius,
                wavelength
            )
            });
        }
        ok
    }

    pub fn particle_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.particle_radius.powi(3)
    }

    pub fn particle_mass(&self) -> f64 {
        self.particle_volume() * self.density_particle
    }

    pub fn coefficients(&self, frequency: f64) -> GorkovCoefficients {
        GorkovCoefficients::new(self, frequency)
    }
}

impl Default for MediumAndParticle {
    fn default() -> Self {
        Self::eps_bead_in_air()
    }
}

/// Monopole and dipole weights of the Gor'kov potential,
/// `U = monopole·|p|² − dipole·|∇p|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GorkovCoefficients {
    pub monopole: f64,
    pub dipole: f64,
}

impl GorkovCoefficients {
    pub fn new(medium: &MediumAndParticle, frequency: f64) -> Self {
        let v = medium.particle_volume();
        let (c0, rho0) = (medium.sound_speed_air, medium.density_air);
        let (cp, rhop) = (medium.sound_speed_particle, medium.density_particle);
        let omega = 2.0 * PI * frequency;
        let monopole = 0.25 * v * (1.0 / (c0 * c0 * rho0) - 1.0 / (cp * cp * rhop));
        let dipole = 0.75 * v * ((rhop - rho0) / (omega * omega * rho0 * (2.0 * rhop + rho0)));
        Self { monopole, dipole }
    }
}
