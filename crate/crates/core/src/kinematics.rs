//! Planar constant-curvature model of a bent link.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sheath::{max_bend_angle_with, AngleKernel, FlapPattern};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendState {
    /// Arc length of the link centreline, mm.
    pub arc_length: f64,
    /// Total bend in degrees, 0 = straight.
    pub bend_angle: f64,
    /// Bending plane. Carried but unused: every computation is in-plane.
    #[serde(default)]
    pub plane_azimuth: f64,
}

impl BendState {
    pub fn new(arc_length: f64, bend_angle: f64) -> Self {
        BendState {
            arc_length,
            bend_angle,
            plane_azimuth: 0.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut violations = Vec::new();
        if !(self.arc_length.is_finite() && self.arc_length > 0.0) {
            violations.push(format!("arc_length must be > 0, got {}", self.arc_length));
        }
        if !(0.0..=360.0).contains(&self.bend_angle) {
            violations.push(format!(
                "bend_angle must lie in [0, 360] deg, got {}",
                self.bend_angle
            ));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }
}

/// Tip of the arc in the bending plane. The base sits at the origin pointing
/// along +y; positive bend curls towards +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPose {
    pub tip_x: f64,
    pub tip_y: f64,
    /// Tip tangent measured from +y, degrees.
    pub tangent: f64,
}

pub fn arc_pose(state: &BendState) -> Result<ArcPose> {
    state.check()?;
    let theta = state.bend_angle.to_radians();
    let length = state.arc_length;
    if theta == 0.0 {
        return Ok(ArcPose {
            tip_x: 0.0,
            tip_y: length,
            tangent: 0.0,
        });
    }
    // r(1 - cos t) and r sin t with r = L / t, in a form that stays accurate
    // as t -> 0.
    let half = theta / 2.0;
    Ok(ArcPose {
        tip_x: length * 2.0 * half.sin().powi(2) / theta,
        tip_y: length * theta.sin() / theta,
        tangent: state.bend_angle,
    })
}

/// Slot usage of one inter-loop interval, mm. Positive is extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotInterval {
    /// Bend carried by this interval, degrees.
    pub angle: f64,
    pub outer_extension: f64,
    pub inner_extension: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotProfile {
    pub intervals: Vec<SlotInterval>,
}

impl SlotProfile {
    pub fn total_angle(&self) -> f64 {
        self.intervals.iter().map(|i| i.angle).sum()
    }
}

/// Slot usage with the default `asin` kernel.
pub fn slot_profile(pattern: &FlapPattern, state: &BendState) -> Result<SlotProfile> {
    slot_profile_with(pattern, state, AngleKernel::Asin)
}

/// Spreads the bend uniformly over the `N - 1` loop intervals.
///
/// Each interval opens its outer slot by `(diameter / 2) * k^-1(angle)`
/// where `k` is the bend-limit kernel, so the slots saturate at exactly
/// `D / 2` when the link reaches its maximum bend angle.
pub fn slot_profile_with(
    pattern: &FlapPattern,
    state: &BendState,
    kernel: AngleKernel,
) -> Result<SlotProfile> {
    let max = max_bend_angle_with(pattern, kernel)?;
    check_within_limit(state.bend_angle, max)?;
    state.check()?;

    let count = pattern.loop_count - 1;
    let per_interval = state.bend_angle / f64::from(count);
    let radius = pattern.sheath_diameter / 2.0;
    let half_slot = pattern.slot_length / 2.0;
    let extension = (radius * inverse_kernel(kernel, per_interval.to_radians())).min(half_slot);
    let interval = SlotInterval {
        angle: per_interval,
        outer_extension: extension,
        inner_extension: -extension,
    };
    Ok(SlotProfile {
        intervals: vec![interval; count as usize],
    })
}

/// Fails with [`Error::Saturation`] when `bend_angle` exceeds the limit.
pub fn check_within_limit(bend_angle: f64, max: f64) -> Result<()> {
    // Allow rounding noise when callers pass the limit itself back in.
    if bend_angle > max * (1.0 + 1e-12) {
        Err(Error::Saturation {
            requested: bend_angle,
            max,
        })
    } else {
        Ok(())
    }
}

fn inverse_kernel(kernel: AngleKernel, angle: f64) -> f64 {
    match kernel {
        AngleKernel::Asin => angle.sin(),
        AngleKernel::Sinh => angle.asinh(),
        AngleKernel::Linear => angle,
    }
}
