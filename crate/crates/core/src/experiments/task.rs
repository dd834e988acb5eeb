use serde::{Deserialize, Serialize};

use super::{index_of_difficulty, ExperimentError};
use crate::geometry::{LevitationVolume, Vec3};

/// Target amplitude of the pointing study, m.
pub const STUDY_AMPLITUDE: f64 = 0.05;
/// Target diameters of the pointing study, m.
pub const STUDY_WIDTHS: [f64; 3] = [0.016, 0.008, 0.004];
/// Aimed movements per condition.
pub const STUDY_MOVEMENTS: u32 = 70;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Along x.
    LeftRight,
    /// Along z.
    FrontBack,
}

impl Direction {
    pub fn unit(self) -> Vec3 {
        match self {
            Direction::LeftRight => Vec3::x(),
            Direction::FrontBack => Vec3::z(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::LeftRight => "left-right",
            Direction::FrontBack => "front-back",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    A,
    B,
}

impl Target {
    pub fn other(self) -> Self {
        match self {
            Target::A => Target::B,
            Target::B => Target::A,
        }
    }

    /// Tag written to the event column.
    pub fn event(self) -> &'static str {
        match self {
            Target::A => "hit:A",
            Target::B => "hit:B",
        }
    }
}

/// Two invisible spherical targets to alternate between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointingTask {
    pub target_a: Vec3,
    pub target_b: Vec3,
    /// Sphere diameter W, m.
    pub width: f64,
    /// Centre distance D, m.
    pub amplitude: f64,
    pub direction: Direction,
    /// Aimed movements to perform.
    pub repetitions: u32,
    /// Per-session shift applied to both targets, m.
    #[serde(default = "Vec3::zeros")]
    pub target_offset: Vec3,
}

impl PointingTask {
    /// Targets placed symmetrically about `center` along `direction`.
    pub fn centered(
        center: Vec3,
        amplitude: f64,
        width: f64,
        direction: Direction,
        repetitions: u32,
    ) -> Result<Self, ExperimentError> {
        let half = direction.unit() * (amplitude / 2.0);
        let task = Self {
            target_a: center - half,
            target_b: center + half,
            width,
            amplitude,
            direction,
            repetitions,
            target_offset: Vec3::zeros(),
        };
        task.check_shape()?;
        Ok(task)
    }

    fn check_shape(&self) -> Result<(), ExperimentError> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(ExperimentError::InvalidWidth(self.width));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(ExperimentError::InvalidTask(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        let d = (self.target_b - self.target_a).norm();
        if (d - self.amplitude).abs() > 1e-9 {
            return Err(ExperimentError::InvalidTask(format!(
                "targets are {d} m apart but the amplitude is {} m",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Checks the task shape and that both spheres lie inside `volume`.
    pub fn validate(&self, volume: &LevitationVolume) -> Result<(), ExperimentError> {
        self.check_shape()?;
        let r = self.width / 2.0;
        for (name, c) in [("A", self.center(Target::A)), ("B", self.center(Target::B))] {
            let inside = (0..3).all(|i| c[i] - r >= volume.min[i] && c[i] + r <= volume.max[i]);
            if !inside {
                return Err(ExperimentError::InvalidTask(format!(
                    "target {name} sphere at {:?} leaves the volume",
                    c.as_slice()
                )));
            }
        }
        Ok(())
    }

    /// Target centre including the session offset.
    pub fn center(&self, target: Target) -> Vec3 {
        self.target_offset
            + match target {
                Target::A => self.target_a,
                Target::B => self.target_b,
            }
    }

    pub fn id_bits(&self) -> f64 {
        index_of_difficulty(self.amplitude, self.width).expect("validated task")
    }

    pub fn label(&self) -> String {
        format!(
            "{}/W{}mm",
            self.direction.label(),
            (self.width * 1e4).round() / 10.0
        )
    }
}

/// The six within-interface conditions: two directions by three widths.
pub fn study_conditions(center: Vec3) -> Vec<PointingTask> {
    [Direction::LeftRight, Direction::FrontBack]
        .into_iter()
        .flat_map(|dir| {
            STUDY_WIDTHS.map(|w| {
                PointingTask::centered(center, STUDY_AMPLITUDE, w, dir, STUDY_MOVEMENTS)
                    .expect("study constants are valid")
            })
        })
        .collect()
}
