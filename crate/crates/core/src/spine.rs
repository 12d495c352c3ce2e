//! Multi-segment flexible spine.
//!
//! Rigid segments of height `w` and diameter `D_s` alternate with sprung
//! ligament gaps. Each gap travels between a compressed value `G_c` and an
//! extended value `G_e`, resting at `G_n`. The ligament beams of length `B`
//! reach in from the rim; at full compression what remains between their
//! tips is the central pass-through gap `g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sheath::{LengthEnvelope, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineDesign {
    /// Rigid segment height `w`, mm.
    pub segment_height: f64,
    /// Rigid segment diameter `D_s`, mm.
    pub segment_diameter: f64,
    /// Ligament beam length `B`, mm.
    pub ligament_beam: f64,
    /// Ligament neutral angle in degrees. Carried for reports only.
    #[serde(default = "default_neutral_angle")]
    pub ligament_neutral_angle: f64,
    pub neutral_gap: f64,
    pub compressed_gap: f64,
    pub extended_gap: f64,
    pub segment_count: u32,
    /// Overrides the chained default `segment_count + end_count - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_count: Option<u32>,
    /// Axial support contributed by each link end, mm.
    pub end_support: f64,
    #[serde(default = "default_end_count")]
    pub end_count: u32,
}

fn default_neutral_angle() -> f64 {
    45.0
}

fn default_end_count() -> u32 {
    2
}

impl SpineDesign {
    /// The prototype spine: 14 segments of 8 mm x 32.5 mm, 9 mm beams,
    /// gaps 0 / 4.53 / 11 mm, 10 mm of support at each of two link ends.
    pub fn reference_design() -> Self {
        SpineDesign {
            segment_height: 8.0,
            segment_diameter: 32.5,
            ligament_beam: 9.0,
            ligament_neutral_angle: default_neutral_angle(),
            neutral_gap: 4.53,
            compressed_gap: 0.0,
            extended_gap: 11.0,
            segment_count: 14,
            gap_count: None,
            end_support: 10.0,
            end_count: default_end_count(),
        }
    }

    /// Number of sprung gaps in the chain.
    pub fn gaps(&self) -> u32 {
        self.gap_count
            .unwrap_or((self.segment_count + self.end_count).saturating_sub(1))
    }

    /// Radial offset of the beam root at full compression, `G_c + w/2`.
    pub fn compressed_reach(&self) -> f64 {
        self.compressed_gap + self.segment_height / 2.0
    }

    pub fn check(&self) -> Result<()> {
        validate_spine(self).into_result()
    }
}

pub fn validate_spine(s: &SpineDesign) -> ValidationReport {
    let mut report = ValidationReport::default();
    let positive = [
        ("segment_height", s.segment_height),
        ("segment_diameter", s.segment_diameter),
        ("ligament_beam", s.ligament_beam),
    ];
    for (field, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            report.push(field, format!("must be > 0, got {value}"));
        }
    }
    if !(s.end_support.is_finite() && s.end_support >= 0.0) {
        report.push(
            "end_support",
            format!("must be >= 0, got {}", s.end_support),
        );
    }
    let gaps = [
        ("compressed_gap", s.compressed_gap),
        ("neutral_gap", s.neutral_gap),
        ("extended_gap", s.extended_gap),
    ];
    for (field, value) in gaps {
        if !(value.is_finite() && value >= 0.0) {
            report.push(field, format!("must be >= 0, got {value}"));
        }
    }
    if !(s.compressed_gap <= s.neutral_gap && s.neutral_gap <= s.extended_gap) {
        report.push(
            "neutral_gap",
            format!(
                "gaps must satisfy compressed <= neutral <= extended, got {} / {} / {}",
                s.compressed_gap, s.neutral_gap, s.extended_gap
            ),
        );
    }
    if s.segment_count < 1 {
        report.push("segment_count", "must be >= 1, got 0".to_string());
    }
    if s.gaps() < 1 {
        report.push("gap_count", "spine needs at least one gap".to_string());
    }
    report
}

/// Central pass-through gap at full compression,
/// `g = D_s/2 - sqrt(B^2 - (G_c + w/2)^2)`.
///
/// A negative result is returned as-is; callers treat it as infeasible.
pub fn central_gap(s: &SpineDesign) -> Result<f64> {
    s.check()?;
    let reach = s.compressed_reach();
    let radicand = s.ligament_beam.powi(2) - reach.powi(2);
    if radicand < 0.0 {
        return Err(Error::Infeasible(format!(
            "central gap has no real solution: ligament beam B = {} is shorter than G_c + w/2 = {}",
            s.ligament_beam, reach
        )));
    }
    Ok(s.segment_diameter / 2.0 - radicand.sqrt())
}

/// Longest ligament beam that still leaves `min_gap` clear at the centre.
pub fn max_beam_length(s: &SpineDesign, min_gap: f64) -> Result<f64> {
    s.check()?;
    let radius = s.segment_diameter / 2.0;
    if min_gap.partial_cmp(&radius) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Infeasible(format!(
            "minimum gap {min_gap} must be below the segment radius {radius}"
        )));
    }
    Ok((radius - min_gap).hypot(s.compressed_reach()))
}

/// Spine lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineEnvelope {
    pub neutral_length: f64,
    pub compressed_length: f64,
    pub extended_length: f64,
    pub rigid_length: f64,
    /// `extended_length - compressed_length`.
    pub flexible_travel: f64,
}

pub fn spine_envelope(s: &SpineDesign) -> Result<SpineEnvelope> {
    s.check()?;
    let rigid =
        f64::from(s.segment_count) * s.segment_height + f64::from(s.end_count) * s.end_support;
    let gaps = f64::from(s.gaps());
    let compressed = rigid + gaps * s.compressed_gap;
    let extended = rigid + gaps * s.extended_gap;
    Ok(SpineEnvelope {
        neutral_length: rigid + gaps * s.neutral_gap,
        compressed_length: compressed,
        extended_length: extended,
        rigid_length: rigid,
        flexible_travel: extended - compressed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub pass: bool,
    /// `l_min - compressed_length`; negative when the spine stops the sheath
    /// from fully compressing.
    pub compression_margin: f64,
    /// `extended_length - l_max`.
    pub extension_margin: f64,
    /// Spine rigid length over its resting flexible length.
    pub spine_rigid_flexible_ratio: f64,
    /// Sheath `l_min` over its resting travel `l_default - l_min`.
    pub sheath_rigid_flexible_ratio: f64,
    pub ratio_ok: bool,
    pub failures: Vec<String>,
}

/// Checks that the spine never limits the sheath's own travel.
pub fn check_compatibility(spine: &SpineEnvelope, sheath: &LengthEnvelope) -> CompatibilityReport {
    let compression_margin = sheath.l_min - spine.compressed_length;
    let extension_margin = spine.extended_length - sheath.l_max;
    let mut failures = Vec::new();
    if compression_margin < 0.0 {
        failures.push(format!(
            "spine limits compression: compressed length {} > sheath l_min {}",
            spine.compressed_length, sheath.l_min
        ));
    }
    if extension_margin < 0.0 {
        failures.push(format!(
            "spine limits extension: extended length {} < sheath l_max {}",
            spine.extended_length, sheath.l_max
        ));
    }
    let spine_ratio = ratio(
        spine.rigid_length,
        spine.neutral_length - spine.rigid_length,
    );
    let sheath_ratio = ratio(sheath.l_min, sheath.l_default - sheath.l_min);
    CompatibilityReport {
        pass: failures.is_empty(),
        compression_margin,
        extension_margin,
        spine_rigid_flexible_ratio: spine_ratio,
        sheath_rigid_flexible_ratio: sheath_ratio,
        ratio_ok: spine_ratio <= sheath_ratio,
        failures,
    }
}

// Zero flexible length reports as f64::MAX so the value stays JSON-safe.
fn ratio(rigid: f64, flexible: f64) -> f64 {
    if flexible > 0.0 {
        rigid / flexible
    } else {
        f64::MAX
    }
}
