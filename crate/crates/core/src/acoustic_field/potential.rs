use super::{
    complex_pressure, AcousticError, GorkovCoefficients, MediumAndParticle, Result, TransducerArray,
};
use crate::geometry::{LevitationVolume, Vec3};

/// A scalar potential whose negative gradient is a force.
///
/// The force is always taken by central differences of the potential, so
/// acoustic and synthetic fields go through exactly the same derivative path.
pub trait PotentialField {
    /// Potential energy in J.
    fn potential(&self, point: &Vec3) -> Result<f64>;

    /// Finite-difference step, m.
    fn step(&self) -> f64;

    /// Region in which the field is defined.
    fn volume(&self) -> &LevitationVolume;

    /// `−∇U` by central differences with step `h`.
    fn force_with_step(&self, point: &Vec3, h: f64) -> Result<Vec3> {
        if !self.volume().contains(point) {
            return Err(AcousticError::OutOfBounds(*point));
        }
        let mut f = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            f[i] = -(self.potential(&(point + e))? - self.potential(&(point - e))?) / (2.0 * h);
        }
        Ok(f)
    }

    fn force(&self, point: &Vec3) -> Result<Vec3> {
        self.force_with_step(point, self.step())
    }
}

/// Gor'kov potential of a bead in the field of a transducer array.
#[derive(Clone, Debug)]
pub struct AcousticField {
    array: TransducerArray,
    medium: MediumAndParticle,
    coefficients: GorkovCoefficients,
    step: f64,
}

impl AcousticField {
    /// Uses a finite-difference step of a hundredth of a wavelength.
    pub fn new(array: TransducerArray, medium: MediumAndParticle) -> Result<Self> {
        medium.validate()?;
        medium.check_small_particle(array.frequency());
        let coefficients = medium.coefficients(array.frequency());
        let step = array.wavelength() / 100.0;
        Ok(Self {
            array,
            medium,
            coefficients,
            step,
        })
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn array(&self) -> &TransducerArray {
        &self.array
    }

    pub fn medium(&self) -> &MediumAndParticle {
        &self.medium
    }

    pub fn coefficients(&self) -> GorkovCoefficients {
        self.coefficients
    }

    /// Same field with every emitter at `amplitude`.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Ok(Self {
            array: self.array.clone().with_amplitude(amplitude)?,
            ..self.clone()
        })
    }

    /// Potential with an explicit step for the pressure derivatives.
    pub fn potential_with_step(&self, point: &Vec3, h: f64) -> Result<f64> {
        let p = complex_pressure(&self.array, point)?;
        let mut grad_sq = 0.0;
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            let dp = (complex_pressure(&self.array, &(point + e))?
                - complex_pressure(&self.array, &(point - e))?)
                / (2.0 * h);
            grad_sq += dp.norm_sqr();
        }
        Ok(self.coefficients.monopole * p.norm_sqr() - self.coefficients.dipole * grad_sq)
    }
}

impl PotentialField for AcousticField {
    fn potential(&self, point: &Vec3) -> Result<f64> {
        self.potential_with_step(point, self.step)
    }

    fn step(&self) -> f64 {
        self.step
    }

    fn volume(&self) -> &LevitationVolume {
        self.array.volume()
    }
}

/// Gor'kov potential `U = K₁|p|² − K₂|∇p|²` at `point`, J.
pub fn gorkov_potential(
    array: &TransducerArray,
    medium: &MediumAndParticle,
    point: &Vec3,
) -> Result<f64> {
    AcousticField::new(array.clone(), *medium)?.potential(point)
}

/// Radiation force `−∇U` at `point`, N.
pub fn acoustic_force(
    array: &TransducerArray,
    medium: &MediumAndParticle,
    point: &Vec3,
) -> Result<Vec3> {
    AcousticField::new(array.clone(), *medium)?.force(point)
}

/// Potential given by a closure, for exercising the trap analysis on fields
/// with known closed forms.
pub struct SyntheticPotential<F> {
    potential: F,
    step: f64,
    volume: LevitationVolume,
}

impl<F: Fn(&Vec3) -> f64> SyntheticPotential<F> {
    pub fn new(potential: F, step: f64, volume: LevitationVolume) -> Self {
        Self {
            potential,
            step,
            volume,
        }
    }
}

impl<F: Fn(&Vec3) -> f64> PotentialField for SyntheticPotential<F> {
    fn potential(&self, point: &Vec3) -> Result<f64> {
        Ok((self.potential)(point))
    }

    fn step(&self) -> f64 {
        self.step
    }

    fn volume(&self) -> &LevitationVolume {
        &self.volume
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ArrayGeometry, SPEED_OF_SOUND_AIR};
    use super::*;

    fn field() -> AcousticField {
        let array = TransducerArray::opposed_grids(
            &ArrayGeometry::default(),
            SPEED_OF_SOUND_AIR,
            LevitationVolume::prototype(),
        )
        .unwrap()
        .focused_at(Vec3::zeros())
        .unwrap();
        AcousticField::new(array, MediumAndParticle::default()).unwrap()
    }

    #[test]
    fn constant_field_has_no_force() {
        let f = SyntheticPotential::new(|_p: &Vec3| 3.0, 1e-4, LevitationVolume::prototype());
        assert_eq!(f.force(&Vec3::new(0.01, 0.0, 0.0)).unwrap(), Vec3::zeros());
    }

    #[test]
    fn uniform_pressure_potential_is_monopole_term() {
        let k1 = MediumAndParticle::default().coefficients(40e3).monopole;
        let p_abs = 1234.0f64;
        let f = SyntheticPotential::new(
            move |_p: &Vec3| k1 * p_abs * p_abs,
            1e-4,
            LevitationVolume::prototype(),
        );
        assert_eq!(f.potential(&Vec3::zeros()).unwrap(), k1 * p_abs * p_abs);
        assert_eq!(f.force(&Vec3::zeros()).unwrap(), Vec3::zeros());
    }

    #[test]
    fn force_outside_volume_is_rejected() {
        let f = field();
        assert!(matches!(
            f.force(&Vec3::new(0.0, 0.06, 0.0)),
            Err(AcousticError::OutOfBounds(_))
        ));
    }

    #[test]
    fn free_functions_match_field_methods() {
        let f = field();
        let p = Vec3::new(0.001, -0.002, 0.0005);
        assert_eq!(
            gorkov_potential(f.array(), f.medium(), &p).unwrap(),
            f.potential(&p).unwrap()
        );
        assert_eq!(
            acoustic_force(f.array(), f.medium(), &p).unwrap(),
            f.force(&p).unwrap()
        );
    }

    #[test]
    fn amplitude_scaling_is_quadratic() {
        let f = field();
        let g = f.with_amplitude(2.0).unwrap();
        let p = Vec3::new(0.002, -0.001, 0.001);
        let (u1, u2) = (f.potential(&p).unwrap(), g.potential(&p).unwrap());
        assert!((u2 - 4.0 * u1).abs() <= 1e-12 * u1.abs());
        let (f1, f2) = (f.force(&p).unwrap(), g.force(&p).unwrap());
        for i in 0..3 {
            assert!((f2[i] - 4.0 * f1[i]).abs() <= 1e-9 * f1.norm(), "{i}");
        }
    }
}
