//! Link designs and the JSON design file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::sheath::{
    derive_lengths, jamming_holding_force, max_bend_angle_with, validate_pattern, AngleKernel,
    FlapPattern, JammingState, LengthEnvelope,
};
use crate::spine::{
    central_gap, check_compatibility, max_beam_length, spine_envelope, validate_spine,
    CompatibilityReport, SpineDesign, SpineEnvelope,
};
use crate::stiffness::StiffnessModelParams;

/// Sheath, optional spine and jamming state: the unit the optimizer ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkDesign {
    pub pattern: FlapPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spine: Option<SpineDesign>,
    #[serde(default)]
    pub jamming: JammingState,
}

impl LinkDesign {
    pub fn reference_design() -> Self {
        LinkDesign {
            pattern: FlapPattern::reference_design(),
            spine: Some(SpineDesign::reference_design()),
            jamming: JammingState::reference(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub name: String,
    pub pattern: FlapPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spine: Option<SpineDesign>,
    #[serde(default)]
    pub jamming: JammingState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness_model: Option<StiffnessModelParams>,
}

impl DesignFile {
    pub fn link(&self) -> LinkDesign {
        LinkDesign {
            pattern: self.pattern,
            spine: self.spine,
            jamming: self.jamming,
        }
    }

    /// Parses a design document, reporting schema problems against the
    /// offending key (`pattern.flap_width`, `spine`, ...).
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
        let Value::Object(mut map) = value else {
            return Err(Error::schema("$", "design file must be a JSON object"));
        };
        let name = match map.remove("name") {
            None => "design".to_string(),
            Some(Value::String(s)) => s,
            Some(_) => return Err(Error::schema("name", "must be a string")),
        };
        let pattern: FlapPattern = required(&mut map, "pattern")?;
        let spine: Option<SpineDesign> = optional(&mut map, "spine")?;
        let jamming: Option<JammingState> = optional(&mut map, "jamming")?;
        let stiffness_model: Option<StiffnessModelParams> = optional(&mut map, "stiffness_model")?;
        if let Some(key) = map.keys().next() {
            return Err(Error::schema(key.clone(), "unknown key"));
        }
        Ok(DesignFile {
            name,
            pattern,
            spine,
            jamming: jamming.unwrap_or_default(),
            stiffness_model,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("design serializes");
        text.push('\n');
        text
    }
}

fn required<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<T> {
    optional(map, key)?.ok_or_else(|| Error::schema(key, "missing required key"))
}

fn optional<T: serde::de::DeserializeOwned>(
    map: &mut Map<String, Value>,
    key: &str,
) -> Result<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| Error::schema(key, e.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineReport {
    pub envelope: SpineEnvelope,
    /// `None` when the beam cannot reach the compressed root.
    pub central_gap: Option<f64>,
    pub max_beam_length: Option<f64>,
    pub min_gap_for_beam_limit: f64,
    pub compatibility: CompatibilityReport,
}

/// Every derived quantity of a design plus a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub name: String,
    pub lengths: LengthEnvelope,
    pub angle_kernel: AngleKernel,
    pub max_bend_angle: f64,
    pub holding_force: f64,
    pub gauge_pressure_kpa: f64,
    pub absolute_pressure_kpa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spine: Option<SpineReport>,
    pub pass: bool,
    pub problems: Vec<String>,
}

/// Builds the report for a design.
///
/// Schema and range errors are returned as `Err`; an infeasible spine
/// yields a report with `pass = false` so the numbers can still be shown.
pub fn report_design(
    name: &str,
    link: &LinkDesign,
    kernel: AngleKernel,
    min_gap: f64,
) -> Result<DesignReport> {
    let mut violations = validate_pattern(&link.pattern);
    if let Some(s) = &link.spine {
        for v in validate_spine(s).violations {
            violations.push(&format!("spine.{}", v.field), v.message);
        }
    }
    violations.into_result()?;
    link.jamming.check()?;

    let lengths = derive_lengths(&link.pattern)?;
    let mut problems = Vec::new();
    let spine = match &link.spine {
        None => None,
        Some(s) => {
            let envelope = spine_envelope(s)?;
            let gap = match central_gap(s) {
                Ok(g) => {
                    if g < 0.0 {
                        problems.push(format!(
                            "central gap infeasible: g = {g:.4} mm < 0, the ligament beams overlap at the centre"
                        ));
                    }
                    Some(g)
                }
                Err(Error::Infeasible(m)) => {
                    problems.push(m);
                    None
                }
                Err(e) => return Err(e),
            };
            let compatibility = check_compatibility(&envelope, &lengths);
            problems.extend(compatibility.failures.iter().cloned());
            Some(SpineReport {
                envelope,
                central_gap: gap,
                max_beam_length: max_beam_length(s, min_gap).ok(),
                min_gap_for_beam_limit: min_gap,
                compatibility,
            })
        }
    };
    Ok(DesignReport {
        name: name.to_string(),
        lengths,
        angle_kernel: kernel,
        max_bend_angle: max_bend_angle_with(&link.pattern, kernel)?,
        holding_force: jamming_holding_force(&link.pattern, &link.jamming)?,
        gauge_pressure_kpa: link.jamming.gauge_pressure_kpa,
        absolute_pressure_kpa: link.jamming.absolute_kpa(),
        spine,
        pass: problems.is_empty(),
        problems,
    })
}

impl DesignReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("design: {}\n", self.name);
        let l = &self.lengths;
        out += &format!(
            "sheath length: max {} mm, min {} mm, default {} mm\n",
            fmt(l.l_max),
            fmt(l.l_min),
            fmt(l.l_default)
        );
        out += &format!(
            "max bend angle ({}): {} deg\n",
            self.angle_kernel.label(),
            fmt(self.max_bend_angle)
        );
        out += &format!(
            "holding force at {} kPa: {} N\n",
            fmt(self.gauge_pressure_kpa),
            fmt(self.holding_force)
        );
        if let Some(s) = &self.spine {
            let e = &s.envelope;
            out += &format!(
                "spine length: compressed {} mm, neutral {} mm, extended {} mm (rigid {} mm)\n",
                fmt(e.compressed_length),
                fmt(e.neutral_length),
                fmt(e.extended_length),
                fmt(e.rigid_length)
            );
            out += &match s.central_gap {
                Some(g) => format!("central gap: {} mm\n", fmt(g)),
                None => "central gap: no real solution\n".to_string(),
            };
            if let Some(b) = s.max_beam_length {
                out += &format!(
                    "max beam length for {} mm gap: {} mm\n",
                    fmt(s.min_gap_for_beam_limit),
                    fmt(b)
                );
            }
            let c = &s.compatibility;
            out += &format!(
                "compatibility: {} (compression margin {} mm, extension margin {} mm)\n",
                if c.pass { "PASS" } else { "FAIL" },
                fmt(c.compression_margin),
                fmt(c.extension_margin)
            );
        }
        out += &format!("verdict: {}\n", if self.pass { "PASS" } else { "FAIL" });
        for p in &self.problems {
            out += &format!("  - {p}\n");
        }
        out
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
