//! Quasi-static resisting-force model of a jammed link pushed sideways at
//! its tip.
//!
//! The model has three regimes:
//!
//! 1. a stick branch whose stiffness grows with vacuum,
//! 2. a friction-slip branch capped by the sheath holding force,
//! 3. a geometric gain with bend angle, knocked down when an unsupported
//!    sheath ovalises past the buckling threshold.
//!
//! For a sheath at vacuum magnitude `P` and tip deflection `x`:
//!
//! ```text
//! stick(x) = (k_u + k_p * P) * x
//! slip(x)  = s * F_hold(P) + (k_u + k_post) * x
//! F(x, t)  = min(stick, slip) * scale * (1 + gain * t) * knockdown + offset
//! ```
//!
//! With `P = 0` both branches reduce to the unjammed spring `k_u * x`.
//! Granular links have no sheath and use an empirical stiffness instead.

mod calibrate;

pub use calibrate::{
    calibrate, calibrate_with, default_free_parameters, CalibrationResult, CalibrationTarget,
    FreeParameter, TargetResidual,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sheath::{derive_lengths, jamming_holding_force, FlapPattern, JammingState};
use crate::spine::{check_compatibility, spine_envelope, SpineDesign};

/// Tip deflection of the standard push test, mm.
pub const PROTOCOL_DEFLECTION_MM: f64 = 10.0;

/// Displacement resolution of synthesized traces, mm.
pub const TRACE_STEP_MM: f64 = 0.1;

/// Actuator speed used to stamp synthesized samples with a time, mm/s.
pub const SYNTHETIC_SPEED_MM_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Granular,
    Layer,
    LayerWithSpine,
}

impl VariantKind {
    pub const ALL: [VariantKind; 3] = [
        VariantKind::Granular,
        VariantKind::Layer,
        VariantKind::LayerWithSpine,
    ];

    pub fn label(self) -> &'static str {
        match self {
            VariantKind::Granular => "granular",
            VariantKind::Layer => "layer",
            VariantKind::LayerWithSpine => "layer_with_spine",
        }
    }

    pub fn has_spine(self) -> bool {
        self == VariantKind::LayerWithSpine
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "granular" | "gj" => Ok(VariantKind::Granular),
            "layer" | "lj" => Ok(VariantKind::Layer),
            "layer_with_spine" | "lj-s" | "lj_s" | "spine" => Ok(VariantKind::LayerWithSpine),
            other => Err(Error::schema(
                "variant",
                format!("unknown link variant `{other}` (granular|layer|layer_with_spine)"),
            )),
        }
    }
}

/// One physical link to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkVariant {
    pub kind: VariantKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<FlapPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spine: Option<SpineDesign>,
}

impl LinkVariant {
    pub fn granular() -> Self {
        LinkVariant {
            kind: VariantKind::Granular,
            pattern: None,
            spine: None,
        }
    }

    pub fn layer(pattern: FlapPattern) -> Self {
        LinkVariant {
            kind: VariantKind::Layer,
            pattern: Some(pattern),
            spine: None,
        }
    }

    pub fn layer_with_spine(pattern: FlapPattern, spine: SpineDesign) -> Self {
        LinkVariant {
            kind: VariantKind::LayerWithSpine,
            pattern: Some(pattern),
            spine: Some(spine),
        }
    }

    /// Builds the variant of `kind` out of a design's sheath and spine.
    pub fn from_parts(
        kind: VariantKind,
        pattern: &FlapPattern,
        spine: Option<&SpineDesign>,
    ) -> Result<Self> {
        let variant = match kind {
            VariantKind::Granular => Self::granular(),
            VariantKind::Layer => Self::layer(*pattern),
            VariantKind::LayerWithSpine => {
                let spine = spine.ok_or_else(|| {
                    Error::schema("spine", "layer_with_spine variant needs a spine")
                })?;
                Self::layer_with_spine(*pattern, *spine)
            }
        };
        variant.check()?;
        Ok(variant)
    }

    pub fn check(&self) -> Result<()> {
        match (self.kind, &self.pattern, &self.spine) {
            (VariantKind::Granular, _, _) => Ok(()),
            (VariantKind::Layer, Some(p), None) => p.check(),
            (VariantKind::LayerWithSpine, Some(p), Some(s)) => {
                let report = check_compatibility(&spine_envelope(s)?, &derive_lengths(p)?);
                if report.pass {
                    Ok(())
                } else {
                    Err(Error::Infeasible(report.failures.join("; ")))
                }
            }
            (VariantKind::Layer, _, Some(_)) => Err(Error::schema(
                "spine",
                "a layer variant without support must not carry a spine",
            )),
            (kind, _, _) => Err(Error::schema(
                "pattern",
                format!("{kind} variant needs a flap pattern"),
            )),
        }
    }
}

/// Per-variant calibration terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantFit {
    /// Multiplier on the sheath force; below 1 for a link with a weak end
    /// attachment.
    pub force_scale: f64,
    /// Relative force gain per radian of bend.
    pub bend_gain: f64,
    /// Loss of central-diameter ratio per radian of bend.
    pub ovalization_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantFits {
    pub granular: VariantFit,
    pub layer: VariantFit,
    pub layer_with_spine: VariantFit,
}

impl VariantFits {
    pub fn get(&self, kind: VariantKind) -> &VariantFit {
        match kind {
            VariantKind::Granular => &self.granular,
            VariantKind::Layer => &self.layer,
            VariantKind::LayerWithSpine => &self.layer_with_spine,
        }
    }

    pub fn get_mut(&mut self, kind: VariantKind) -> &mut VariantFit {
        match kind {
            VariantKind::Granular => &mut self.granular,
            VariantKind::Layer => &mut self.layer,
            VariantKind::LayerWithSpine => &mut self.layer_with_spine,
        }
    }
}

impl Default for VariantFits {
    // Ovalization rates follow the central-diameter ratios measured at
    // 180 deg: 0.929 granular, 0.745 layer, 0.979 with spine.
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        let fit = |rate: f64| VariantFit {
            force_scale: 1.0,
            bend_gain: 0.25,
            ovalization_rate: rate,
        };
        VariantFits {
            granular: fit((1.0 - 0.929) / pi),
            layer: fit((1.0 - 0.745) / pi),
            layer_with_spine: fit((1.0 - 0.979) / pi),
        }
    }
}

/// Calibration container for the resisting-force model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessModelParams {
    /// Stiffness of the link with no vacuum, N/mm.
    pub unjammed_stiffness: f64,
    /// Stick-branch stiffness added per kPa of vacuum, N/mm/kPa.
    pub jammed_stiffness_per_kpa: f64,
    /// Maps the friction holding force onto the slip threshold.
    pub jam_stiffness_scale: f64,
    /// Slope added to the unjammed stiffness once layers slip, N/mm.
    pub post_slip_slope: f64,
    pub buckling_ratio_threshold: f64,
    pub buckling_force_knockdown: f64,
    /// Residual deflection after unloading as a fraction of the stroke.
    pub hysteresis_fraction: f64,
    /// Constant force already on the sensor at zero deflection, N.
    #[serde(default)]
    pub preload_offset: f64,
    /// Empirical stiffness of a granular link, N/mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granular_stiffness: Option<f64>,
    #[serde(default)]
    pub variants: VariantFits,
}

impl Default for StiffnessModelParams {
    fn default() -> Self {
        StiffnessModelParams {
            unjammed_stiffness: 0.05,
            jammed_stiffness_per_kpa: 0.05,
            jam_stiffness_scale: 0.2,
            post_slip_slope: 0.02,
            buckling_ratio_threshold: 0.8,
            buckling_force_knockdown: 0.5,
            hysteresis_fraction: 0.2,
            preload_offset: 0.0,
            granular_stiffness: None,
            variants: VariantFits::default(),
        }
    }
}

impl StiffnessModelParams {
    pub fn check(&self) -> Result<()> {
        let mut violations = Vec::new();
        let non_negative = [
            ("unjammed_stiffness", self.unjammed_stiffness),
            ("jammed_stiffness_per_kpa", self.jammed_stiffness_per_kpa),
            ("jam_stiffness_scale", self.jam_stiffness_scale),
            ("post_slip_slope", self.post_slip_slope),
            ("buckling_force_knockdown", self.buckling_force_knockdown),
            ("preload_offset", self.preload_offset),
        ];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                violations.push(format!("{field} must be >= 0, got {value}"));
            }
        }
        if !(self.buckling_ratio_threshold > 0.0 && self.buckling_ratio_threshold < 1.0) {
            violations.push(format!(
                "buckling_ratio_threshold must lie in (0, 1), got {}",
                self.buckling_ratio_threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.hysteresis_fraction) {
            violations.push(format!(
                "hysteresis_fraction must lie in [0, 1], got {}",
                self.hysteresis_fraction
            ));
        }
        if let Some(k) = self.granular_stiffness {
            if !(k.is_finite() && k >= 0.0) {
                violations.push(format!("granular_stiffness must be >= 0, got {k}"));
            }
        }
        for kind in VariantKind::ALL {
            let fit = self.variants.get(kind);
            for (name, value) in [
                ("force_scale", fit.force_scale),
                ("bend_gain", fit.bend_gain),
                ("ovalization_rate", fit.ovalization_rate),
            ] {
                if !(value.is_finite() && value >= 0.0) {
                    violations.push(format!("variants.{kind}.{name} must be >= 0, got {value}"));
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }
}

/// Central-diameter ratio predicted by the linear ovalization model.
pub fn predicted_diameter_ratio(
    kind: VariantKind,
    bend_angle: f64,
    params: &StiffnessModelParams,
) -> f64 {
    1.0 - params.variants.get(kind).ovalization_rate * bend_angle.to_radians()
}

/// True when an unsupported link has ovalised past the buckling threshold.
pub fn buckled(variant: &LinkVariant, bend_angle: f64, params: &StiffnessModelParams) -> bool {
    !variant.kind.has_spine()
        && predicted_diameter_ratio(variant.kind, bend_angle, params)
            < params.buckling_ratio_threshold
}

/// Force profile of one link at one bend angle, shared by prediction and
/// trace synthesis so both agree bit for bit.
#[derive(Debug, Clone, Copy)]
struct ForceCurve {
    stick_stiffness: f64,
    slip_force: f64,
    slip_stiffness: f64,
    multiplier: f64,
    offset: f64,
}

impl ForceCurve {
    fn new(
        variant: &LinkVariant,
        bend_angle: f64,
        state: &JammingState,
        params: &StiffnessModelParams,
    ) -> Result<Self> {
        variant.check()?;
        state.check()?;
        params.check()?;
        if !(bend_angle.is_finite() && bend_angle >= 0.0) {
            return Err(Error::Validation(vec![format!(
                "bend_angle must be >= 0, got {bend_angle}"
            )]));
        }

        let (stick_stiffness, slip_force, slip_stiffness) = match variant.kind {
            VariantKind::Granular => {
                let k = params.granular_stiffness.ok_or_else(|| {
                    Error::MissingModel(
                        "granular variant has no predictive model; supply granular_stiffness"
                            .to_string(),
                    )
                })?;
                (k, f64::INFINITY, k)
            }
            VariantKind::Layer | VariantKind::LayerWithSpine => {
                let pattern = variant.pattern.as_ref().expect("checked above");
                let hold = jamming_holding_force(pattern, state)?;
                (
                    params.unjammed_stiffness
                        + params.jammed_stiffness_per_kpa * state.magnitude_kpa(),
                    params.jam_stiffness_scale * hold,
                    params.unjammed_stiffness + params.post_slip_slope,
                )
            }
        };

        let fit = params.variants.get(variant.kind);
        let mut multiplier = fit.force_scale * (1.0 + fit.bend_gain * bend_angle.to_radians());
        if buckled(variant, bend_angle, params) {
            multiplier *= params.buckling_force_knockdown;
        }
        Ok(ForceCurve {
            stick_stiffness,
            slip_force,
            slip_stiffness,
            multiplier,
            offset: params.preload_offset,
        })
    }

    /// Loading-phase force without the preload offset.
    fn elastic(&self, displacement: f64) -> f64 {
        let stick = self.stick_stiffness * displacement;
        let slip = self.slip_force + self.slip_stiffness * displacement;
        stick.min(slip) * self.multiplier
    }

    fn loading(&self, displacement: f64) -> f64 {
        self.elastic(displacement) + self.offset
    }
}

/// Peak resisting force of the standard 10 mm push, N.
pub fn predict_max_force(
    variant: &LinkVariant,
    bend_angle: f64,
    state: &JammingState,
    params: &StiffnessModelParams,
) -> Result<f64> {
    Ok(ForceCurve::new(variant, bend_angle, state, params)?.loading(PROTOCOL_DEFLECTION_MM))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Loading,
    Unloading,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Loading => "loading",
            Phase::Unloading => "unloading",
        }
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "loading" | "load" => Ok(Phase::Loading),
            "unloading" | "unload" => Ok(Phase::Unloading),
            other => Err(Error::schema("phase", format!("unknown phase `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time_s: f64,
    pub displacement: f64,
    pub force: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub variant: String,
    pub bend_angle: f64,
    pub pressure_kpa: f64,
    pub trial: u32,
}

/// Time-ordered force-displacement record of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceDisplacementTrace {
    pub metadata: TraceMetadata,
    pub samples: Vec<TraceSample>,
}

impl ForceDisplacementTrace {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &TraceSample> + '_ {
        self.samples.iter().filter(move |s| s.phase == phase)
    }

    pub fn max_loading_force(&self) -> Option<f64> {
        self.phase(Phase::Loading).map(|s| s.force).reduce(f64::max)
    }
}

/// Synthesizes a deflect-and-return trial at 0.1 mm resolution.
///
/// Loading follows the model curve up to 10 mm. Unloading replays the same
/// curve compressed onto `[r, 10]`, where `r = hysteresis_fraction * 10` is
/// the deflection the link keeps; below `r` only the preload remains. An
/// unjammed link (zero vacuum) keeps no deflection.
pub fn synthesize_trace(
    variant: &LinkVariant,
    bend_angle: f64,
    state: &JammingState,
    params: &StiffnessModelParams,
) -> Result<ForceDisplacementTrace> {
    let curve = ForceCurve::new(variant, bend_angle, state, params)?;
    let steps = (PROTOCOL_DEFLECTION_MM / TRACE_STEP_MM).round() as u32;
    let residual = if state.magnitude_kpa() > 0.0 {
        params.hysteresis_fraction * PROTOCOL_DEFLECTION_MM
    } else {
        0.0
    };
    let span = PROTOCOL_DEFLECTION_MM - residual;

    let mut samples = Vec::with_capacity(2 * steps as usize + 2);
    for i in 0..=steps {
        let x = f64::from(i) / f64::from(steps) * PROTOCOL_DEFLECTION_MM;
        samples.push(TraceSample {
            time_s: x / SYNTHETIC_SPEED_MM_S,
            displacement: x,
            force: curve.loading(x),
            phase: Phase::Loading,
        });
    }
    for i in (0..=steps).rev() {
        let x = f64::from(i) / f64::from(steps) * PROTOCOL_DEFLECTION_MM;
        let elastic = if x > residual {
            curve.elastic((x - residual) / span * PROTOCOL_DEFLECTION_MM)
        } else {
            0.0
        };
        samples.push(TraceSample {
            time_s: (2.0 * PROTOCOL_DEFLECTION_MM - x) / SYNTHETIC_SPEED_MM_S,
            displacement: x,
            force: elastic + curve.offset,
            phase: Phase::Unloading,
        });
    }

    Ok(ForceDisplacementTrace {
        metadata: TraceMetadata {
            variant: variant.kind.label().to_string(),
            bend_angle,
            pressure_kpa: state.gauge_pressure_kpa,
            trial: 1,
        },
        samples,
    })
}
