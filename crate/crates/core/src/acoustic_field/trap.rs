use nalgebra::Matrix3;

use super::{AcousticError, AcousticField, PotentialField, Result};
use crate::geometry::{Axis, Vec3};

/// Spacing of the outward force scans, m.
pub const CHARACTERIZATION_SCAN_STEP: f64 = 1e-4;
/// Half-width of the stiffness fit window as a fraction of the trap radius.
pub const FIT_WINDOW_FRACTION: f64 = 0.25;

const FIT_SAMPLES: usize = 21;
const VERTICAL_SCAN_STEPS: i32 = 50;

/// Extent and strength of the trap along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisProfile {
    pub axis: Axis,
    /// Distance to the first force reversal towards −axis, m.
    pub radius_neg: f64,
    /// Distance to the first force reversal towards +axis, m.
    pub radius_pos: f64,
    /// Largest restoring force magnitude seen inside the trap, N.
    pub max_force: f64,
    /// The scan left the levitation volume before the force reversed on at
    /// least one side; that radius is the distance to the boundary.
    pub volume_bounded: bool,
}

impl AxisProfile {
    pub fn radius(&self) -> f64 {
        self.radius_neg.min(self.radius_pos)
    }

    pub fn diameter(&self) -> f64 {
        self.radius_neg + self.radius_pos
    }
}

/// Least-squares line through force vs. displacement along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisFit {
    pub axis: Axis,
    /// `b` in `F = −b·x`, N/m.
    pub stiffness: f64,
    /// Force at zero displacement according to the fit, N.
    pub intercept: f64,
    /// Half-width of the sampled window, m.
    pub window: f64,
    pub residual_rms: f64,
    /// Largest force magnitude in the window, N.
    pub max_abs_force: f64,
}

impl AxisFit {
    pub fn relative_residual(&self) -> f64 {
        self.residual_rms / self.max_abs_force
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearTrap {
    pub fits: [AxisFit; 3],
}

impl LinearTrap {
    pub fn stiffness(&self) -> Vec3 {
        Vec3::new(
            self.fits[0].stiffness,
            self.fits[1].stiffness,
            self.fits[2].stiffness,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapCharacterization {
    pub center: Vec3,
    pub axes: [AxisProfile; 3],
    pub linear: LinearTrap,
}

impl TrapCharacterization {
    pub fn diameters(&self) -> Vec3 {
        Vec3::new(
            self.axes[0].diameter(),
            self.axes[1].diameter(),
            self.axes[2].diameter(),
        )
    }

    pub fn max_forces(&self) -> Vec3 {
        Vec3::new(
            self.axes[0].max_force,
            self.axes[1].max_force,
            self.axes[2].max_force,
        )
    }

    pub fn stiffness(&self) -> Vec3 {
        self.linear.stiffness()
    }

    pub fn axis(&self, axis: Axis) -> &AxisProfile {
        &self.axes[axis.index()]
    }
}

/// Locates the potential minimum nearest to `focus`.
///
/// The vertical line through the focus is scanned over ±50 finite-difference
/// steps for local minima of `U`; the closest one (ties broken by lower
/// potential, then by the lower position) seeds a Newton iteration on the
/// force. The result is checked to be a true minimum.
pub fn find_trap_center(field: &impl PotentialField, focus: &Vec3) -> Result<Vec3> {
    let h = field.step();
    let mut samples = Vec::with_capacity(2 * VERTICAL_SCAN_STEPS as usize + 1);
    for i in -VERTICAL_SCAN_STEPS..=VERTICAL_SCAN_STEPS {
        let p = focus + Vec3::y() * (i as f64 * h);
        if field.volume().contains(&p) {
            samples.push((i, p, field.potential(&p)?));
        }
    }
    let seed = samples
        .windows(3)
        .filter(|w| w[1].2 < w[0].2 && w[1].2 < w[2].2)
        .map(|w| w[1])
        .min_by(|a, b| {
            a.0.abs()
                .cmp(&b.0.abs())
                .then(a.2.total_cmp(&b.2))
                .then(a.0.cmp(&b.0))
        })
        .ok_or(AcousticError::NoTrap(*focus))?
        .1;
    newton_refine(field, seed)
}

fn force_jacobian(field: &impl PotentialField, x: &Vec3, h: f64) -> Result<Matrix3<f64>> {
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vec3::zeros();
        e[j] = h;
        let col = (field.force(&(x + e))? - field.force(&(x - e))?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

fn newton_refine(field: &impl PotentialField, seed: Vec3) -> Result<Vec3> {
    let h = field.step();
    let mut x = seed;
    for _ in 0..40 {
        let f = field.force(&x)?;
        let jac = force_jacobian(field, &x, h)?;
        let Some(delta) = jac.lu().solve(&(-f)) else {
            return Err(AcousticError::NoTrap(seed));
        };
        // Stay within one step of the current estimate.
        let delta = if delta.norm() > h {
            delta * (h / delta.norm())
        } else {
            delta
        };
        x += delta;
        if delta.norm() < 1e-13 {
            break;
        }
    }
    let stiffness = -force_jacobian(field, &x, h)?;
    let sym = (stiffness + stiffness.transpose()) / 2.0;
    if sym.cholesky().is_none() {
        return Err(AcousticError::NoTrap(seed));
    }
    Ok(x)
}

fn scan_direction(
    field: &impl PotentialField,
    center: &Vec3,
    axis: Axis,
    sign: f64,
) -> Result<(f64, f64, bool)> {
    let e = axis.unit() * sign;
    let step = CHARACTERIZATION_SCAN_STEP;
    let mut prev = (0.0, 0.0);
    let mut max_force = 0.0f64;
    let mut n = 1;
    loop {
        let d = n as f64 * step;
        let p = center + e * d;
        if !field.volume().contains(&p) {
            return Ok((prev.0, max_force, true));
        }
        // outward component: negative while restoring
        let f = field.force(&p)?[axis.index()] * sign;
        if f >= 0.0 {
            let (d0, f0) = prev;
            let radius = if f0 < 0.0 {
                d0 + (d - d0) * (-f0) / (f - f0)
            } else {
                d0
            };
            return Ok((radius, max_force, false));
        }
        max_force = max_force.max(-f);
        prev = (d, f);
        n += 1;
    }
}

fn scan_axes(field: &impl PotentialField, center: &Vec3) -> Result<[AxisProfile; 3]> {
    let scan = |axis: Axis| -> Result<AxisProfile> {
        let (radius_neg, f_neg, b_neg) = scan_direction(field, center, axis, -1.0)?;
        let (radius_pos, f_pos, b_pos) = scan_direction(field, center, axis, 1.0)?;
        if radius_neg <= 0.0 || radius_pos <= 0.0 {
            return Err(AcousticError::DegenerateTrap {
                axis,
                stiffness: 0.0,
            });
        }
        Ok(AxisProfile {
            axis,
            radius_neg,
            radius_pos,
            max_force: f_neg.max(f_pos),
            volume_bounded: b_neg || b_pos,
        })
    };
    Ok([scan(Axis::X)?, scan(Axis::Y)?, scan(Axis::Z)?])
}

/// Per-axis linear fit of force against displacement over `[−w, w]`.
pub fn linearize_trap_in_window(
    field: &impl PotentialField,
    center: &Vec3,
    windows: Vec3,
) -> Result<LinearTrap> {
    let fit = |axis: Axis| -> Result<AxisFit> {
        let w = windows[axis.index()];
        let mut xs = Vec::with_capacity(FIT_SAMPLES);
        let mut fs = Vec::with_capacity(FIT_SAMPLES);
        for i in 0..FIT_SAMPLES {
            let s = -w + 2.0 * w * i as f64 / (FIT_SAMPLES - 1) as f64;
            xs.push(s);
            fs.push(field.force(&(center + axis.unit() * s))?[axis.index()]);
        }
        let n = FIT_SAMPLES as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let mf = fs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxf: f64 = xs.iter().zip(&fs).map(|(x, f)| (x - mx) * (f - mf)).sum();
        let slope = sxf / sxx;
        let intercept = mf - slope * mx;
        let residual_rms = (xs
            .iter()
            .zip(&fs)
            .map(|(x, f)| (f - (intercept + slope * x)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let stiffness = -slope;
        if !(stiffness > 0.0) {
            return Err(AcousticError::DegenerateTrap { axis, stiffness });
        }
        Ok(AxisFit {
            axis,
            stiffness,
            intercept,
            window: w,
            residual_rms,
            max_abs_force: fs.iter().fold(0.0f64, |m, f| m.max(f.abs())),
        })
    };
    Ok(LinearTrap {
        fits: [fit(Axis::X)?, fit(Axis::Y)?, fit(Axis::Z)?],
    })
}

/// Stiffness vector `b` (restoring, `F = −b·x`) fitted over ±25 % of the trap
/// radius on each axis.
pub fn linearize_trap(field: &impl PotentialField, center: &Vec3) -> Result<LinearTrap> {
    let axes = scan_axes(field, center)?;
    linearize_trap_in_window(field, center, fit_windows(&axes))
}

fn fit_windows(axes: &[AxisProfile; 3]) -> Vec3 {
    Vec3::new(axes[0].radius(), axes[1].radius(), axes[2].radius()) * FIT_WINDOW_FRACTION
}

/// Trap extent, peak restoring forces and stiffness along each axis.
pub fn characterize_trap(
    field: &impl PotentialField,
    center: &Vec3,
) -> Result<TrapCharacterization> {
    let axes = scan_axes(field, center)?;
    let linear = linearize_trap_in_window(field, center, fit_windows(&axes))?;
    Ok(TrapCharacterization {
        center: *center,
        axes,
        linear,
    })
}

/// A field whose common amplitude has been scaled so that the peak vertical
/// restoring force hits a target.
#[derive(Clone, Debug)]
pub struct CalibratedTrap {
    pub field: AcousticField,
    pub characterization: TrapCharacterization,
}

impl CalibratedTrap {
    pub fn amplitude(&self) -> f64 {
        self.field.array().amplitude()
    }

    pub fn center(&self) -> Vec3 {
        self.characterization.center
    }
}

/// Scales the common emitter amplitude so the largest vertical restoring
/// force equals `target_max_y_force`. Forces go as amplitude², so one
/// square-root rescale is exact.
pub fn calibrate_amplitude(
    field: &AcousticField,
    target_max_y_force: f64,
) -> Result<CalibratedTrap> {
    if !(target_max_y_force.is_finite() && target_max_y_force > 0.0) {
        return Err(AcousticError::InvalidTarget(target_max_y_force));
    }
    let focus = field
        .array()
        .focus()
        .unwrap_or_else(|| field.array().volume().center());
    let center = find_trap_center(field, &focus)?;
    let current = scan_axes(field, &center)?[Axis::Y.index()].max_force;
    let amplitude = field.array().amplitude() * (target_max_y_force / current).sqrt();
    let scaled = field.with_amplitude(amplitude)?;
    let center = newton_refine(&scaled, center)?;
    let characterization = characterize_trap(&scaled, &center)?;
    Ok(CalibratedTrap {
        field: scaled,
        characterization,
    })
}
