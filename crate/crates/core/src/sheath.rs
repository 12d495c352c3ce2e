//! Closed-form model of the layer-jamming sheath.
//!
//! The sheath is a double-sided flap strip wound into a tube. Successive
//! loops are sewn through guide holes spaced `d` apart and connected through
//! slots of length `D`; the slot play sets both the length envelope and the
//! maximum bend angle, while inter-layer friction under vacuum sets the
//! holding force.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atmospheric pressure used to convert gauge to absolute pressure, in kPa.
pub const DEFAULT_AMBIENT_KPA: f64 = 101.9;

/// Flap strip parameters. Lengths in mm, angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlapPattern {
    /// Flap width `W`.
    pub flap_width: f64,
    /// Flap length `L`.
    pub flap_length: f64,
    /// Length of the mid band `h`.
    pub mid_length: f64,
    /// Guide hole distance `d`.
    pub guide_hole_distance: f64,
    /// Slot length `D`. Zero means a sheath without sliding play.
    pub slot_length: f64,
    /// Sheath diameter.
    pub sheath_diameter: f64,
    /// Number of layer loops `N`.
    pub loop_count: u32,
    pub flaps_per_section: u32,
    /// Overlapping contact surfaces per side, `n`.
    pub contact_surfaces: u32,
    pub friction_coefficient: f64,
    /// Flap lean from the strip normal.
    #[serde(default = "default_inclination")]
    pub inclination_angle: f64,
}

fn default_inclination() -> f64 {
    30.0
}

impl FlapPattern {
    /// The reference prototype: 38 mm sheath, 32 loops, Mylar at mu = 0.4.
    pub fn reference_design() -> Self {
        FlapPattern {
            flap_width: 10.0,
            flap_length: 30.0,
            mid_length: 15.0,
            guide_hole_distance: 6.0,
            slot_length: 4.0,
            sheath_diameter: 38.0,
            loop_count: 32,
            flaps_per_section: 12,
            contact_surfaces: 7,
            friction_coefficient: 0.4,
            inclination_angle: default_inclination(),
        }
    }

    /// Returns `Ok(())` when [`validate_pattern`] reports nothing.
    pub fn check(&self) -> Result<()> {
        validate_pattern(self).into_result()
    }
}

/// Vacuum state of the sheath. Gauge pressure is negative when evacuated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammingState {
    pub gauge_pressure_kpa: f64,
    #[serde(default = "default_ambient")]
    pub ambient_pressure_kpa: f64,
}

fn default_ambient() -> f64 {
    DEFAULT_AMBIENT_KPA
}

impl JammingState {
    pub fn from_gauge(gauge_pressure_kpa: f64) -> Self {
        JammingState {
            gauge_pressure_kpa,
            ambient_pressure_kpa: DEFAULT_AMBIENT_KPA,
        }
    }

    /// The -60 kPa test condition.
    pub fn reference() -> Self {
        Self::from_gauge(-60.0)
    }

    pub fn absolute_kpa(&self) -> f64 {
        self.ambient_pressure_kpa + self.gauge_pressure_kpa
    }

    /// Pressure difference across the membranes, kPa.
    pub fn magnitude_kpa(&self) -> f64 {
        self.gauge_pressure_kpa.abs()
    }

    pub fn check(&self) -> Result<()> {
        let mut violations = Vec::new();
        if !self.gauge_pressure_kpa.is_finite() || !self.ambient_pressure_kpa.is_finite() {
            violations.push("pressures must be finite".to_string());
        } else if self.absolute_kpa() < 0.0 {
            violations.push(format!(
                "absolute pressure must be non-negative: ambient {} + gauge {} < 0",
                self.ambient_pressure_kpa, self.gauge_pressure_kpa
            ));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }
}

impl Default for JammingState {
    fn default() -> Self {
        Self::reference()
    }
}

/// Length limits of the sheath in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthEnvelope {
    pub l_max: f64,
    pub l_min: f64,
    pub l_default: f64,
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, field: &str, message: String) {
        self.violations.push(Violation {
            field: field.to_string(),
            message,
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(
                self.violations.iter().map(ToString::to_string).collect(),
            ))
        }
    }
}

/// Lists every violated pattern invariant. Never fails.
pub fn validate_pattern(p: &FlapPattern) -> ValidationReport {
    let mut report = ValidationReport::default();

    let positive = [
        ("flap_width", p.flap_width),
        ("flap_length", p.flap_length),
        ("mid_length", p.mid_length),
        ("guide_hole_distance", p.guide_hole_distance),
        ("sheath_diameter", p.sheath_diameter),
    ];
    for (field, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            report.push(field, format!("must be > 0, got {value}"));
        }
    }
    if !(p.slot_length.is_finite() && p.slot_length >= 0.0) {
        report.push(
            "slot_length",
            format!("must be >= 0, got {}", p.slot_length),
        );
    }
    if p.loop_count < 2 {
        report.push(
            "loop_count",
            format!("loop_count_N >= 2 required, got {}", p.loop_count),
        );
    }
    if p.flaps_per_section < 1 {
        report.push("flaps_per_section", "must be >= 1, got 0".to_string());
    }
    if p.contact_surfaces < 1 {
        report.push(
            "contact_surfaces",
            "contact_surfaces_n >= 1 required, got 0".to_string(),
        );
    }
    let mu = p.friction_coefficient;
    if !(mu > 0.0 && mu < 2.0) {
        report.push(
            "friction_coefficient",
            format!("must lie in (0, 2), got {mu}"),
        );
    }
    if !(p.inclination_angle >= 0.0 && p.inclination_angle < 90.0) {
        report.push(
            "inclination_angle",
            format!("must lie in [0, 90) deg, got {}", p.inclination_angle),
        );
    }
    if p.slot_length >= 2.0 * p.guide_hole_distance {
        report.push(
            "slot_length",
            format!(
                "slot merging: D >= 2d (D = {}, d = {})",
                p.slot_length, p.guide_hole_distance
            ),
        );
    }
    if p.slot_length >= p.sheath_diameter {
        report.push(
            "slot_length",
            format!(
                "slot exceeds sheath: D >= diameter (D = {}, diameter = {})",
                p.slot_length, p.sheath_diameter
            ),
        );
    }
    report
}

/// `l_max, l_min = (N - 1)(d +- D/2) + h`, `l_default = (N - 1)d + h`.
pub fn derive_lengths(p: &FlapPattern) -> Result<LengthEnvelope> {
    p.check()?;
    let intervals = f64::from(p.loop_count - 1);
    let half_slot = p.slot_length / 2.0;
    Ok(LengthEnvelope {
        l_max: intervals * (p.guide_hole_distance + half_slot) + p.mid_length,
        l_min: intervals * (p.guide_hole_distance - half_slot) + p.mid_length,
        l_default: intervals * p.guide_hole_distance + p.mid_length,
    })
}

/// Function applied to the slot-to-diameter ratio when computing the bend
/// limit. `Asin` is the geometric chord relation; `Sinh` and `Linear` are
/// kept for comparison studies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleKernel {
    #[default]
    Asin,
    Sinh,
    Linear,
}

impl AngleKernel {
    pub const ALL: [AngleKernel; 3] = [AngleKernel::Asin, AngleKernel::Sinh, AngleKernel::Linear];

    pub fn label(self) -> &'static str {
        match self {
            AngleKernel::Asin => "asin",
            AngleKernel::Sinh => "sinh",
            AngleKernel::Linear => "linear",
        }
    }

    fn apply(self, ratio: f64) -> f64 {
        match self {
            AngleKernel::Asin => ratio.asin(),
            AngleKernel::Sinh => ratio.sinh(),
            AngleKernel::Linear => ratio,
        }
    }
}

impl std::str::FromStr for AngleKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asin" => Ok(AngleKernel::Asin),
            "sinh" => Ok(AngleKernel::Sinh),
            "linear" => Ok(AngleKernel::Linear),
            other => Err(Error::schema(
                "angle-kernel",
                format!("expected asin|sinh|linear, got `{other}`"),
            )),
        }
    }
}

/// Maximum bend angle in degrees using the `asin` kernel.
pub fn max_bend_angle(p: &FlapPattern) -> Result<f64> {
    max_bend_angle_with(p, AngleKernel::Asin)
}

/// `(N - 1) * kernel(D / diameter)`, converted to degrees.
pub fn max_bend_angle_with(p: &FlapPattern, kernel: AngleKernel) -> Result<f64> {
    let ratio = p.slot_length / p.sheath_diameter;
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Domain(format!(
            "slot/diameter ratio {ratio} outside [0, 1) (D = {}, diameter = {})",
            p.slot_length, p.sheath_diameter
        )));
    }
    p.check()?;
    Ok(f64::from(p.loop_count - 1) * kernel.apply(ratio).to_degrees())
}

/// Friction force needed to separate the jammed layers, `F = mu n P W L`, in N.
pub fn jamming_holding_force(p: &FlapPattern, state: &JammingState) -> Result<f64> {
    p.check()?;
    state.check()?;
    let pressure_pa = state.magnitude_kpa() * 1e3;
    let width_m = p.flap_width * 1e-3;
    let length_m = p.flap_length * 1e-3;
    Ok(p.friction_coefficient * f64::from(p.contact_surfaces) * pressure_pa * width_m * length_m)
}
