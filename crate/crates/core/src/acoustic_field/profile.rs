use serde::Serialize;
use std::io::Write;

use super::{PotentialField, Result};
use crate::geometry::{Axis, Vec3};

/// One sample of a force sweep through the trap centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForceProfileRow {
    pub axis: Axis,
    #[serde(rename = "displacement_m")]
    pub displacement: f64,
    #[serde(rename = "Fx_N")]
    pub fx: f64,
    #[serde(rename = "Fy_N")]
    pub fy: f64,
    #[serde(rename = "Fz_N")]
    pub fz: f64,
}

/// Force along the three axis lines through `center`, sampled every `step`
/// over `±half_range`. Samples outside the field's volume are skipped.
pub fn force_profile(
    field: &impl PotentialField,
    center: &Vec3,
    half_range: f64,
    step: f64,
) -> Result<Vec<ForceProfileRow>> {
    let n = (half_range / step).round() as i64;
    let mut rows = Vec::with_capacity(3 * (2 * n as usize + 1));
    for axis in Axis::ALL {
        for i in -n..=n {
            let displacement = i as f64 * step;
            let p = center + axis.unit() * displacement;
            if !field.volume().contains(&p) {
                continue;
            }
            let f = field.force(&p)?;
            rows.push(ForceProfileRow {
                axis,
                displacement,
                fx: f.x,
                fy: f.y,
                fz: f.z,
            });
        }
    }
    Ok(rows)
}

pub fn write_force_profile_csv<W: Write>(rows: &[ForceProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
