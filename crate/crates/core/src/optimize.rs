//! Grid search plus coordinate refinement over link designs.
//!
//! Every candidate is scored by [`evaluate_design`], which composes the
//! sheath and spine formulas into signed constraint margins. A design is
//! feasible when every margin is present and non-negative.
//!
//! Ranking order: objective descending, then central gap descending, then
//! the canonical parameter tuple ascending. The order is total, so results
//! do not depend on evaluation order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::LinkDesign;
use crate::error::{Error, Result};
use crate::sheath::{
    derive_lengths, jamming_holding_force, max_bend_angle_with, validate_pattern, AngleKernel,
    JammingState,
};
use crate::spine::{central_gap, spine_envelope, validate_spine};

/// A searchable design dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    FlapWidth,
    FlapLength,
    MidLength,
    GuideHoleDistance,
    SlotLength,
    SheathDiameter,
    LoopCount,
    FlapsPerSection,
    SegmentHeight,
    SegmentDiameter,
    LigamentBeam,
    CompressedGap,
    NeutralGap,
    ExtendedGap,
    SegmentCount,
    EndSupport,
}

impl Parameter {
    pub const ALL: [Parameter; 16] = [
        Parameter::FlapWidth,
        Parameter::FlapLength,
        Parameter::MidLength,
        Parameter::GuideHoleDistance,
        Parameter::SlotLength,
        Parameter::SheathDiameter,
        Parameter::LoopCount,
        Parameter::FlapsPerSection,
        Parameter::SegmentHeight,
        Parameter::SegmentDiameter,
        Parameter::LigamentBeam,
        Parameter::CompressedGap,
        Parameter::NeutralGap,
        Parameter::ExtendedGap,
        Parameter::SegmentCount,
        Parameter::EndSupport,
    ];

    pub fn is_integer(self) -> bool {
        matches!(
            self,
            Parameter::LoopCount | Parameter::FlapsPerSection | Parameter::SegmentCount
        )
    }

    pub fn is_spine(self) -> bool {
        self >= Parameter::SegmentHeight
    }

    pub fn name(self) -> &'static str {
        match self {
            Parameter::FlapWidth => "flap_width",
            Parameter::FlapLength => "flap_length",
            Parameter::MidLength => "mid_length",
            Parameter::GuideHoleDistance => "guide_hole_distance",
            Parameter::SlotLength => "slot_length",
            Parameter::SheathDiameter => "sheath_diameter",
            Parameter::LoopCount => "loop_count",
            Parameter::FlapsPerSection => "flaps_per_section",
            Parameter::SegmentHeight => "segment_height",
            Parameter::SegmentDiameter => "segment_diameter",
            Parameter::LigamentBeam => "ligament_beam",
            Parameter::CompressedGap => "compressed_gap",
            Parameter::NeutralGap => "neutral_gap",
            Parameter::ExtendedGap => "extended_gap",
            Parameter::SegmentCount => "segment_count",
            Parameter::EndSupport => "end_support",
        }
    }

    /// Current value, `None` for a spine parameter on a spineless design.
    pub fn get(self, link: &LinkDesign) -> Option<f64> {
        let p = &link.pattern;
        Some(match self {
            Parameter::FlapWidth => p.flap_width,
            Parameter::FlapLength => p.flap_length,
            Parameter::MidLength => p.mid_length,
            Parameter::GuideHoleDistance => p.guide_hole_distance,
            Parameter::SlotLength => p.slot_length,
            Parameter::SheathDiameter => p.sheath_diameter,
            Parameter::LoopCount => f64::from(p.loop_count),
            Parameter::FlapsPerSection => f64::from(p.flaps_per_section),
            spine_param => {
                let s = link.spine.as_ref()?;
                match spine_param {
                    Parameter::SegmentHeight => s.segment_height,
                    Parameter::SegmentDiameter => s.segment_diameter,
                    Parameter::LigamentBeam => s.ligament_beam,
                    Parameter::CompressedGap => s.compressed_gap,
                    Parameter::NeutralGap => s.neutral_gap,
                    Parameter::ExtendedGap => s.extended_gap,
                    Parameter::SegmentCount => f64::from(s.segment_count),
                    _ => s.end_support,
                }
            }
        })
    }

    /// Writes `value`, rounding integer parameters. No-op for a spine
    /// parameter on a spineless design.
    pub fn set(self, link: &mut LinkDesign, value: f64) {
        let int = || value.round().max(0.0) as u32;
        let p = &mut link.pattern;
        match self {
            Parameter::FlapWidth => p.flap_width = value,
            Parameter::FlapLength => p.flap_length = value,
            Parameter::MidLength => p.mid_length = value,
            Parameter::GuideHoleDistance => p.guide_hole_distance = value,
            Parameter::SlotLength => p.slot_length = value,
            Parameter::SheathDiameter => p.sheath_diameter = value,
            Parameter::LoopCount => p.loop_count = int(),
            Parameter::FlapsPerSection => p.flaps_per_section = int(),
            spine_param => {
                let Some(s) = link.spine.as_mut() else { return };
                match spine_param {
                    Parameter::SegmentHeight => s.segment_height = value,
                    Parameter::SegmentDiameter => s.segment_diameter = value,
                    Parameter::LigamentBeam => s.ligament_beam = value,
                    Parameter::CompressedGap => s.compressed_gap = value,
                    Parameter::NeutralGap => s.neutral_gap = value,
                    Parameter::ExtendedGap => s.extended_gap = value,
                    Parameter::SegmentCount => s.segment_count = int(),
                    _ => s.end_support = value,
                }
            }
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed interval sampled at `steps` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_steps")]
    pub steps: u32,
}

fn default_steps() -> u32 {
    5
}

impl ParameterRange {
    pub fn fixed(value: f64) -> Self {
        ParameterRange {
            min: value,
            max: value,
            steps: 1,
        }
    }

    /// Grid values in ascending order; integer parameters are rounded and
    /// deduplicated.
    pub fn values(&self, integer: bool) -> Vec<f64> {
        let n = if self.min == self.max {
            1
        } else {
            self.steps.max(1)
        };
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    self.min
                } else if i == n - 1 {
                    self.max
                } else {
                    self.min + (self.max - self.min) * f64::from(i) / f64::from(n - 1)
                }
            })
            .map(|x| if integer { x.round() } else { x })
            .collect();
        v.dedup();
        v
    }

    fn spacing(&self) -> f64 {
        if self.steps > 1 {
            (self.max - self.min) / f64::from(self.steps - 1)
        } else {
            self.max - self.min
        }
    }
}

/// Parameter box around a base design. Parameters not listed keep the base
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    #[serde(default = "LinkDesign::reference_design")]
    pub base: LinkDesign,
    pub parameters: BTreeMap<Parameter, ParameterRange>,
}

impl SearchBounds {
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.parameters.is_empty() {
            problems.push("bounds list no parameters".to_string());
        }
        for (param, r) in &self.parameters {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                problems.push(format!(
                    "{param}: bounds must be finite with min <= max, got [{}, {}]",
                    r.min, r.max
                ));
            }
            if r.steps == 0 {
                problems.push(format!("{param}: steps must be >= 1"));
            }
            if param.is_spine() && self.base.spine.is_none() {
                problems.push(format!("{param}: base design has no spine"));
            }
            if param.is_integer() && r.min < 0.0 {
                problems.push(format!("{param}: integer parameter must be >= 0"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Bounds that pin every listed parameter to its base value.
    pub fn pinned(base: LinkDesign, params: &[Parameter]) -> Self {
        SearchBounds {
            base,
            parameters: params
                .iter()
                .filter_map(|&p| Some((p, ParameterRange::fixed(p.get(&base)?))))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthRange {
    /// The sheath must compress to at most this length.
    pub l_min_max: f64,
    /// The sheath must extend to at least this length.
    pub l_max_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterBounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveWeights {
    /// Weight on holding force per mm of sheath diameter, N/mm.
    pub force_per_diameter: f64,
    pub central_gap: f64,
    pub bend_angle: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            force_per_diameter: 1.0,
            central_gap: 0.0,
            bend_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignTargets {
    pub min_bend_angle: f64,
    pub min_central_gap: f64,
    pub min_holding_force: f64,
    /// Gauge pressure the holding force is evaluated at; the design's own
    /// jamming state when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pressure_kpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_length_range: Option<LengthRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sheath_diameter_bounds: Option<DiameterBounds>,
    pub angle_kernel: AngleKernel,
    pub weights: ObjectiveWeights,
}

impl Default for DesignTargets {
    fn default() -> Self {
        DesignTargets {
            min_bend_angle: 0.0,
            min_central_gap: 0.0,
            min_holding_force: 0.0,
            pressure_kpa: None,
            required_length_range: None,
            sheath_diameter_bounds: None,
            angle_kernel: AngleKernel::Asin,
            weights: ObjectiveWeights::default(),
        }
    }
}

impl DesignTargets {
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("min_bend_angle", self.min_bend_angle),
            ("min_central_gap", self.min_central_gap),
            ("min_holding_force", self.min_holding_force),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        if let Some(r) = self.required_length_range {
            if !(r.l_min_max >= 0.0 && r.l_min_max <= r.l_max_min) {
                problems.push(format!(
                    "required_length_range must satisfy 0 <= l_min_max <= l_max_min, got ({}, {})",
                    r.l_min_max, r.l_max_min
                ));
            }
        }
        if let Some(b) = self.sheath_diameter_bounds {
            if !(b.min >= 0.0 && b.min <= b.max) {
                problems.push(format!(
                    "sheath_diameter_bounds must satisfy 0 <= min <= max, got ({}, {})",
                    b.min, b.max
                ));
            }
        }
        if let Some(p) = self.pressure_kpa {
            if let Err(e) = JammingState::from_gauge(p).check() {
                problems.push(e.to_string());
            }
        }
        let w = self.weights;
        if ![w.force_per_diameter, w.central_gap, w.bend_angle]
            .iter()
            .all(|x| x.is_finite())
        {
            problems.push("objective weights must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Slack of one constraint: `value - requirement` for lower bounds,
/// `requirement - value` for upper bounds. `None` when the value cannot be
/// computed for this design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargin {
    pub name: String,
    pub value: Option<f64>,
    pub requirement: f64,
    pub margin: Option<f64>,
}

impl ConstraintMargin {
    fn lower(name: &str, value: Option<f64>, requirement: f64) -> Self {
        ConstraintMargin {
            name: name.to_string(),
            value,
            requirement,
            margin: value.map(|v| v - requirement),
        }
    }

    fn upper(name: &str, value: Option<f64>, requirement: f64) -> Self {
        ConstraintMargin {
            name: name.to_string(),
            value,
            requirement,
            margin: value.map(|v| requirement - v),
        }
    }

    pub fn satisfied(&self) -> bool {
        self.margin.is_some_and(|m| m >= 0.0)
    }

    /// Shortfall relative to the requirement (floored at 1); infinite when
    /// the value is unavailable, zero when satisfied.
    pub fn normalized_violation(&self) -> f64 {
        match self.margin {
            None => f64::INFINITY,
            Some(m) if m >= 0.0 => 0.0,
            Some(m) => -m / self.requirement.abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Grid,
    Refined,
    Evaluated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDesign {
    pub link: LinkDesign,
    pub objective: f64,
    pub feasible: bool,
    pub origin: Origin,
    /// Central gap, mm; `None` without a spine or with no real solution.
    pub central_gap: Option<f64>,
    pub constraint_margins: Vec<ConstraintMargin>,
}

impl RankedDesign {
    pub fn margin(&self, name: &str) -> Option<f64> {
        self.constraint_margins
            .iter()
            .find(|c| c.name == name)
            .and_then(|c| c.margin)
    }

    /// Every parameter value in [`Parameter::ALL`] order.
    pub fn canonical_tuple(&self) -> Vec<f64> {
        canonical_tuple(&self.link)
    }

    fn worst_violation(&self) -> (f64, Option<&ConstraintMargin>) {
        self.constraint_margins
            .iter()
            .map(|c| (c.normalized_violation(), c))
            .filter(|(v, _)| *v > 0.0)
            .fold(
                (0.0, None),
                |best, (v, c)| {
                    if v > best.0 {
                        (v, Some(c))
                    } else {
                        best
                    }
                },
            )
    }
}

pub fn canonical_tuple(link: &LinkDesign) -> Vec<f64> {
    Parameter::ALL.iter().filter_map(|p| p.get(link)).collect()
}

fn cmp_tuple(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Best first.
pub fn rank_order(a: &RankedDesign, b: &RankedDesign) -> Ordering {
    b.objective
        .total_cmp(&a.objective)
        .then_with(|| {
            let ga = a.central_gap.unwrap_or(f64::NEG_INFINITY);
            let gb = b.central_gap.unwrap_or(f64::NEG_INFINITY);
            gb.total_cmp(&ga)
        })
        .then_with(|| cmp_tuple(&a.canonical_tuple(), &b.canonical_tuple()))
}

/// Scores one design against the targets. Pure; never fails.
pub fn evaluate_design(link: &LinkDesign, targets: &DesignTargets) -> RankedDesign {
    let p = &link.pattern;
    let mut margins = Vec::new();
    let pattern_report = validate_pattern(p);
    let pattern_ok = pattern_report.is_valid();
    margins.push(ConstraintMargin::upper(
        "pattern_valid",
        Some(pattern_report.violations.len() as f64),
        0.0,
    ));

    let jamming = targets
        .pressure_kpa
        .map_or(link.jamming, JammingState::from_gauge);
    let lengths = derive_lengths(p).ok();
    let theta = max_bend_angle_with(p, targets.angle_kernel).ok();
    let force = jamming_holding_force(p, &jamming).ok();
    margins.push(ConstraintMargin::lower(
        "bend_angle",
        theta,
        targets.min_bend_angle,
    ));
    margins.push(ConstraintMargin::lower(
        "holding_force",
        force,
        targets.min_holding_force,
    ));
    if let Some(r) = targets.required_length_range {
        margins.push(ConstraintMargin::upper(
            "length_min",
            lengths.map(|l| l.l_min),
            r.l_min_max,
        ));
        margins.push(ConstraintMargin::lower(
            "length_max",
            lengths.map(|l| l.l_max),
            r.l_max_min,
        ));
    }
    if let Some(b) = targets.sheath_diameter_bounds {
        margins.push(ConstraintMargin::lower(
            "diameter_min",
            Some(p.sheath_diameter),
            b.min,
        ));
        margins.push(ConstraintMargin::upper(
            "diameter_max",
            Some(p.sheath_diameter),
            b.max,
        ));
    }

    let mut gap = None;
    if let Some(s) = &link.spine {
        let spine_report = validate_spine(s);
        let spine_ok = spine_report.is_valid();
        margins.push(ConstraintMargin::upper(
            "spine_valid",
            Some(spine_report.violations.len() as f64),
            0.0,
        ));
        margins.push(ConstraintMargin::lower(
            "beam_reach",
            spine_ok.then_some(s.ligament_beam),
            s.compressed_reach(),
        ));
        gap = central_gap(s).ok();
        margins.push(ConstraintMargin::lower(
            "central_gap",
            gap,
            targets.min_central_gap,
        ));
        let envelope = spine_envelope(s).ok();
        margins.push(ConstraintMargin::upper(
            "spine_compression",
            envelope.map(|e| e.compressed_length),
            lengths.map_or(f64::NAN, |l| l.l_min),
        ));
        margins.push(ConstraintMargin::lower(
            "spine_extension",
            envelope.map(|e| e.extended_length),
            lengths.map_or(f64::NAN, |l| l.l_max),
        ));
        margins.push(ConstraintMargin::upper(
            "spine_fits_sheath",
            Some(s.segment_diameter),
            p.sheath_diameter,
        ));
    }
    // A NaN requirement (sheath lengths unavailable) leaves the margin unset.
    for c in &mut margins {
        if c.margin.is_some_and(f64::is_nan) {
            c.margin = None;
        }
    }

    let feasible = pattern_ok && margins.iter().all(ConstraintMargin::satisfied);
    let w = targets.weights;
    let objective = match (force, theta) {
        (Some(f), Some(t)) => {
            w.force_per_diameter * f / p.sheath_diameter
                + w.central_gap * gap.unwrap_or(0.0)
                + w.bend_angle * t
        }
        _ => f64::NEG_INFINITY,
    };
    RankedDesign {
        link: *link,
        objective: if objective.is_nan() {
            f64::NEG_INFINITY
        } else {
            objective
        },
        feasible,
        origin: Origin::Evaluated,
        central_gap: gap,
        constraint_margins: margins,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Maximum number of design evaluations.
    pub budget: usize,
    /// Seed for the coordinate order of the refinement.
    pub seed: u64,
    /// How many of the best grid designs are refined.
    pub refine_top: usize,
    pub refine_rounds: u32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            budget: 20_000,
            seed: 0,
            refine_top: 5,
            refine_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    /// Constraint with the largest normalized shortfall in the
    /// least-infeasible design.
    pub binding_constraint: String,
    pub closest: RankedDesign,
    /// Constraints that no evaluated design satisfied, with the best margin
    /// seen for each.
    pub never_satisfied: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Feasible designs, best first.
    pub designs: Vec<RankedDesign>,
    pub grid_size: usize,
    pub evaluations: usize,
    /// Grid points per parameter after fitting into the budget.
    pub grid: BTreeMap<Parameter, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<Infeasibility>,
}

impl SearchResult {
    pub fn grid_feasible(&self) -> impl Iterator<Item = &RankedDesign> + '_ {
        self.designs.iter().filter(|d| d.origin == Origin::Grid)
    }
}

/// Grid values per parameter, coarsened until the full product fits into
/// `budget` evaluations.
pub fn search_grid(bounds: &SearchBounds, budget: usize) -> Vec<(Parameter, Vec<f64>)> {
    let mut ranges: Vec<(Parameter, ParameterRange)> =
        bounds.parameters.iter().map(|(&p, &r)| (p, r)).collect();
    loop {
        let grid: Vec<(Parameter, Vec<f64>)> = ranges
            .iter()
            .map(|(p, r)| (*p, r.values(p.is_integer())))
            .collect();
        let size = grid
            .iter()
            .try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()))
            .unwrap_or(usize::MAX);
        if size <= budget.max(1) {
            return grid;
        }
        // Drop one step from the densest dimension; ties go to the first.
        let densest = grid
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.len().cmp(&b.1 .1.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty bounds");
        let r = &mut ranges[densest].1;
        r.steps = (grid[densest].1.len() as u32).saturating_sub(1).max(1);
    }
}

fn design_at(base: &LinkDesign, grid: &[(Parameter, Vec<f64>)], mut index: usize) -> LinkDesign {
    let mut link = *base;
    for (param, values) in grid.iter().rev() {
        param.set(&mut link, values[index % values.len()]);
        index /= values.len();
    }
    link
}

/// Enumerates the grid, refines the best feasible designs and ranks them.
pub fn search_designs(
    targets: &DesignTargets,
    bounds: &SearchBounds,
    options: &SearchOptions,
) -> Result<SearchResult> {
    targets.check()?;
    bounds.check()?;
    if options.budget < 1 {
        return Err(Error::Validation(vec!["budget must be >= 1".to_string()]));
    }

    let grid = search_grid(bounds, options.budget);
    let grid_size: usize = grid.iter().map(|(_, v)| v.len()).product();
    let evaluated: Vec<RankedDesign> = (0..grid_size)
        .into_par_iter()
        .map(|i| {
            let mut d = evaluate_design(&design_at(&bounds.base, &grid, i), targets);
            d.origin = Origin::Grid;
            d
        })
        .collect();
    let mut evaluations = grid_size;

    let mut feasible: Vec<RankedDesign> =
        evaluated.iter().filter(|d| d.feasible).cloned().collect();
    feasible.sort_by(rank_order);

    let mut remaining = options.budget.saturating_sub(grid_size);
    let continuous: Vec<(Parameter, ParameterRange)> = bounds
        .parameters
        .iter()
        .filter(|(p, r)| !p.is_integer() && r.max > r.min)
        .map(|(&p, &r)| (p, r))
        .collect();
    let mut refined = Vec::new();
    if !continuous.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let seeds: Vec<RankedDesign> = feasible.iter().take(options.refine_top).cloned().collect();
        for seed in seeds {
            let mut order = continuous.clone();
            order.shuffle(&mut rng);
            let (best, used) = refine(
                seed.clone(),
                &order,
                targets,
                options.refine_rounds,
                remaining,
            );
            remaining -= used;
            evaluations += used;
            if canonical_tuple(&best.link) != canonical_tuple(&seed.link) {
                refined.push(best);
            }
        }
    }

    let mut designs = feasible;
    designs.extend(refined);
    designs.sort_by(rank_order);
    designs.dedup_by(|a, b| canonical_tuple(&a.link) == canonical_tuple(&b.link));

    let infeasibility = if designs.is_empty() {
        Some(diagnose(&evaluated))
    } else {
        None
    };
    Ok(SearchResult {
        designs,
        grid_size,
        evaluations,
        grid: grid.into_iter().collect(),
        infeasibility,
    })
}

/// Coordinate descent from a feasible design: each round tries one step
/// either way along every coordinate, keeping strict improvements that stay
/// feasible, then halves the steps. Returns the best design and the number
/// of evaluations spent.
fn refine(
    start: RankedDesign,
    coords: &[(Parameter, ParameterRange)],
    targets: &DesignTargets,
    rounds: u32,
    budget: usize,
) -> (RankedDesign, usize) {
    let mut best = start;
    let mut steps: Vec<f64> = coords.iter().map(|(_, r)| r.spacing() * 0.5).collect();
    let mut used = 0;
    for _ in 0..rounds {
        for (k, (param, range)) in coords.iter().enumerate() {
            for dir in [1.0, -1.0] {
                if used >= budget {
                    return (best, used);
                }
                let current = param.get(&best.link).expect("checked in bounds");
                let value = (current + dir * steps[k]).clamp(range.min, range.max);
                if value == current {
                    continue;
                }
                let mut link = best.link;
                param.set(&mut link, value);
                let mut candidate = evaluate_design(&link, targets);
                used += 1;
                if candidate.feasible && rank_order(&candidate, &best) == Ordering::Less {
                    candidate.origin = Origin::Refined;
                    best = candidate;
                }
            }
        }
        for s in &mut steps {
            *s *= 0.5;
        }
    }
    (best, used)
}

fn diagnose(evaluated: &[RankedDesign]) -> Infeasibility {
    let closest = evaluated
        .iter()
        .min_by(|a, b| {
            a.worst_violation()
                .0
                .total_cmp(&b.worst_violation().0)
                .then_with(|| cmp_tuple(&a.canonical_tuple(), &b.canonical_tuple()))
        })
        .expect("grid has at least one point")
        .clone();
    let binding = closest
        .worst_violation()
        .1
        .map_or_else(|| "unknown".to_string(), |c| c.name.clone());

    let mut best: BTreeMap<String, Option<f64>> = BTreeMap::new();
    let mut names = Vec::new();
    for d in evaluated {
        for c in &d.constraint_margins {
            let entry = best.entry(c.name.clone()).or_insert_with(|| {
                names.push(c.name.clone());
                None
            });
            if let Some(m) = c.margin {
                *entry = Some(entry.map_or(m, |e: f64| e.max(m)));
            }
        }
    }
    let never_satisfied = names
        .into_iter()
        .filter_map(|n| {
            let m = best[&n];
            (!m.is_some_and(|m| m >= 0.0)).then_some((n, m))
        })
        .collect();
    Infeasibility {
        binding_constraint: binding,
        closest,
        never_satisfied,
    }
}

/// One row per design for a quick spreadsheet look.
pub fn summary_csv(result: &SearchResult) -> String {
    let mut out = String::from("rank,origin,objective,central_gap");
    for p in Parameter::ALL {
        out += ",";
        out += p.name();
    }
    out.push('\n');
    for (i, d) in result.designs.iter().enumerate() {
        out += &format!(
            "{},{},{},{}",
            i + 1,
            match d.origin {
                Origin::Grid => "grid",
                Origin::Refined => "refined",
                Origin::Evaluated => "evaluated",
            },
            d.objective,
            d.central_gap.map_or(String::new(), |g| g.to_string())
        );
        for p in Parameter::ALL {
            out += ",";
            if let Some(v) = p.get(&d.link) {
                out += &v.to_string();
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_targets() -> DesignTargets {
        DesignTargets {
            min_bend_angle: 187.0,
            min_central_gap: 7.5,
            required_length_range: Some(LengthRange {
                l_min_max: 139.0,
                l_max_min: 263.0,
            }),
            sheath_diameter_bounds: Some(DiameterBounds {
                min: 30.0,
                max: 45.0,
            }),
            ..DesignTargets::default()
        }
    }

    #[test]
    fn reference_meets_its_targets() {
        let d = evaluate_design(&LinkDesign::reference_design(), &reference_targets());
        assert!(d.feasible, "{:#?}", d.constraint_margins);
        assert!(d.constraint_margins.iter().all(ConstraintMargin::satisfied));
    }

    #[test]
    fn zero_targets_give_raw_values() {
        let d = evaluate_design(&LinkDesign::reference_design(), &DesignTargets::default());
        assert_abs_diff_eq!(d.margin("holding_force").unwrap(), 50.4, epsilon = 1e-9);
        assert_abs_diff_eq!(d.margin("bend_angle").unwrap(), 187.312, epsilon = 1e-3);
        assert_abs_diff_eq!(d.margin("central_gap").unwrap(), 8.1877, epsilon = 1e-4);
    }

    #[test]
    fn gap_shortfall() {
        let t = DesignTargets {
            min_central_gap: 8.3,
            ..DesignTargets::default()
        };
        let d = evaluate_design(&LinkDesign::reference_design(), &t);
        assert_abs_diff_eq!(
            d.margin("central_gap").unwrap(),
            -0.112_257_748,
            epsilon = 1e-6
        );
        assert!(!d.feasible);
    }

    #[test]
    fn pinned_bounds_return_reference() {
        let base = LinkDesign::reference_design();
        let bounds = SearchBounds::pinned(base, &Parameter::ALL);
        let r = search_designs(&reference_targets(), &bounds, &SearchOptions::default()).unwrap();
        assert_eq!(r.grid_size, 1);
        assert_eq!(r.designs.len(), 1);
        assert_eq!(r.designs[0].link, base);
    }

    #[test]
    fn unreachable_bend_names_constraint() {
        let t = DesignTargets {
            min_bend_angle: 720.0,
            ..DesignTargets::default()
        };
        let mut bounds = SearchBounds::pinned(LinkDesign::reference_design(), &[]);
        bounds.parameters.insert(
            Parameter::SlotLength,
            ParameterRange {
                min: 2.0,
                max: 6.0,
                steps: 5,
            },
        );
        bounds.parameters.insert(
            Parameter::LoopCount,
            ParameterRange {
                min: 10.0,
                max: 40.0,
                steps: 4,
            },
        );
        let r = search_designs(&t, &bounds, &SearchOptions::default()).unwrap();
        assert!(r.designs.is_empty());
        let inf = r.infeasibility.unwrap();
        assert_eq!(inf.binding_constraint, "bend_angle");
        assert!(inf.never_satisfied.iter().any(|(n, _)| n == "bend_angle"));
    }

    #[test]
    fn budget_coarsens_grid() {
        let mut bounds = SearchBounds::pinned(LinkDesign::reference_design(), &[]);
        for p in [
            Parameter::FlapWidth,
            Parameter::FlapLength,
            Parameter::SlotLength,
        ] {
            let v = p.get(&bounds.base).unwrap();
            bounds.parameters.insert(
                p,
                ParameterRange {
                    min: v * 0.8,
                    max: v * 1.2,
                    steps: 10,
                },
            );
        }
        let grid = search_grid(&bounds, 100);
        let size: usize = grid.iter().map(|(_, v)| v.len()).product();
        assert!((50..=100).contains(&size), "{size}");
    }

    #[test]
    fn empty_bounds_rejected() {
        let bounds = SearchBounds::pinned(LinkDesign::reference_design(), &[]);
        assert!(search_designs(&reference_targets(), &bounds, &SearchOptions::default()).is_err());
    }

    #[test]
    fn integer_grid_rounds() {
        let r = ParameterRange {
            min: 2.0,
            max: 5.0,
            steps: 7,
        };
        assert_eq!(r.values(true), [2.0, 3.0, 4.0, 5.0]);
    }
}
