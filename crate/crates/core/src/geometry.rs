use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Cartesian axis. `Y` is vertical, i.e. the axis the two arrays face along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.index()] = 1.0;
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned box in which particles can be levitated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevitationVolume {
    pub min: Vec3,
    pub max: Vec3,
}

impl LevitationVolume {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Box of the given size centred on the origin.
    pub fn centered(size: Vec3) -> Self {
        Self {
            min: -size / 2.0,
            max: size / 2.0,
        }
    }

    /// The 14 × 10.6 × 9 cm volume between the two prototype arrays
    /// (x along the 14-element rows, y vertical, z along the 9-element columns).
    pub fn prototype() -> Self {
        Self::centered(Vec3::new(0.14, 0.106, 0.09))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) / 2.0
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    /// Closed containment test of the box grown by `margin` on every side.
    pub fn contains_with_margin(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - margin && p[i] <= self.max[i] + margin)
    }

    /// Strict interior test (boundary excluded).
    pub fn strictly_contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    /// Clamps `p` into the box. The flag reports whether any component moved.
    pub fn clamp(&self, p: &Vec3) -> (Vec3, bool) {
        let mut out = *p;
        let mut clamped = false;
        for i in 0..3 {
            let c = p[i].clamp(self.min[i], self.max[i]);
            if c != p[i] {
                clamped = true;
            }
            out[i] = c;
        }
        (out, clamped)
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| {
            self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i]
        })
    }
}

impl Default for LevitationVolume {
    fn default() -> Self {
        Self::prototype()
    }
}
