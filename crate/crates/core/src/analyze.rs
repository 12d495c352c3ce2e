//! Metrics over recorded or synthesized push-test trials and diameter
//! measurements.
//!
//! Trial CSV: `time_s,displacement_mm,force_N,phase`, one file per trial,
//! named `<variant>_<angle>deg_trial<k>.csv`. Diameter CSV:
//! `angle_deg,diameter_mm`.
//!
//! Every aggregate sorts its inputs before summing, so results do not
//! depend on trial order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_FORCE_THRESHOLD_N;
use crate::error::{Error, Result};
use crate::stiffness::{ForceDisplacementTrace, Phase, TraceMetadata, TraceSample};

/// Repeats of one variant at one bend angle and pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub trials: Vec<ForceDisplacementTrace>,
}

impl TrialSet {
    pub fn new(trials: Vec<ForceDisplacementTrace>) -> Result<Self> {
        let set = TrialSet { trials };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<()> {
        let Some(first) = self.trials.first() else {
            return Err(Error::Analysis("trial set is empty".to_string()));
        };
        let m = &first.metadata;
        for t in &self.trials[1..] {
            let o = &t.metadata;
            let same = o.variant == m.variant
                && o.bend_angle == m.bend_angle
                && (o.pressure_kpa == m.pressure_kpa
                    || (o.pressure_kpa.is_nan() && m.pressure_kpa.is_nan()));
            if !same {
                return Err(Error::Analysis(format!(
                    "trial {} ({} at {} deg) does not match trial {} ({} at {} deg)",
                    o.trial, o.variant, o.bend_angle, m.trial, m.variant, m.bend_angle
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for a single trial.
    pub std: f64,
    pub count: usize,
}

/// Mean and sample standard deviation of `values`, summed in sorted order.
pub fn mean_std(values: &[f64]) -> ForceStats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return ForceStats {
            mean: f64::NAN,
            std: f64::NAN,
            count: 0,
        };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    ForceStats {
        mean,
        std,
        count: n,
    }
}

/// Mean and spread of each trial's peak loading force.
pub fn max_resisting_force(set: &TrialSet) -> Result<ForceStats> {
    set.check()?;
    let peaks = set
        .trials
        .iter()
        .map(|t| {
            t.max_loading_force().ok_or_else(|| {
                Error::Analysis(format!("trial {} has no loading samples", t.metadata.trial))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&peaks))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub displacement: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSeries {
    pub loading: Vec<BandPoint>,
    pub unloading: Vec<BandPoint>,
}

/// Mean +-1 sigma curves on a common displacement grid, one per phase.
///
/// The grid starts at the largest first displacement over all trials and
/// runs in `step` increments up to the smallest last displacement.
pub fn band_series(set: &TrialSet, step: f64) -> Result<BandSeries> {
    set.check()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Analysis(format!(
            "band step must be > 0, got {step}"
        )));
    }
    Ok(BandSeries {
        loading: phase_band(set, Phase::Loading, step)?,
        unloading: phase_band(set, Phase::Unloading, step)?,
    })
}

fn phase_band(set: &TrialSet, phase: Phase, step: f64) -> Result<Vec<BandPoint>> {
    let curves: Vec<Vec<(f64, f64)>> = set
        .trials
        .iter()
        .map(|t| {
            let mut pts: Vec<(f64, f64)> =
                t.phase(phase).map(|s| (s.displacement, s.force)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts
        })
        .collect();
    if curves.iter().any(Vec::is_empty) {
        return Err(Error::Analysis(format!(
            "every trial needs {} samples",
            phase.label()
        )));
    }
    let lo = curves.iter().map(|c| c[0].0).fold(f64::MIN, f64::max);
    let hi = curves
        .iter()
        .map(|c| c[c.len() - 1].0)
        .fold(f64::MAX, f64::min);
    let span = hi - lo;
    if step > span {
        return Err(Error::Analysis(format!(
            "band step {step} mm exceeds the common {} span of {span} mm",
            phase.label()
        )));
    }
    let count = ((span / step) * (1.0 + 1e-12)).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let x = lo + i as f64 * step;
            let forces: Vec<f64> = curves.iter().map(|c| interpolate(c, x)).collect();
            let stats = mean_std(&forces);
            BandPoint {
                displacement: x,
                mean: stats.mean,
                std: stats.std,
            }
        })
        .collect())
}

/// Linear interpolation on points sorted by x; clamps outside the range.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = points.partition_point(|p| p.0 < x);
    if idx == 0 {
        return points[0].1;
    }
    if idx == points.len() {
        return points[idx - 1].1;
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    if x1 == x {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Deflection the link keeps after unloading: the displacement of the first
/// unloading sample whose force is at or below `zero_threshold`. Zero when
/// the force stays above it all the way back.
pub fn hysteresis_residual(trace: &ForceDisplacementTrace, zero_threshold: f64) -> Result<f64> {
    let mut unloading = trace.phase(Phase::Unloading).peekable();
    if unloading.peek().is_none() {
        return Err(Error::Analysis(format!(
            "trial {} has no unloading phase",
            trace.metadata.trial
        )));
    }
    Ok(unloading
        .find(|s| s.force <= zero_threshold)
        .map_or(0.0, |s| s.displacement))
}

/// Shifts a trace so contact starts at 0 mm.
///
/// Onset is the last loading sample at or below `threshold` before the
/// first one above it. Samples that end up at negative displacement are
/// dropped. A trace that never exceeds the threshold is returned unchanged.
pub fn align_contact_onset(
    trace: &ForceDisplacementTrace,
    threshold: f64,
) -> ForceDisplacementTrace {
    let loading: Vec<&TraceSample> = trace.phase(Phase::Loading).collect();
    let Some(first) = loading.iter().position(|s| s.force > threshold) else {
        return trace.clone();
    };
    let onset = if first == 0 {
        loading[0].displacement
    } else {
        loading[first - 1].displacement
    };
    ForceDisplacementTrace {
        metadata: trace.metadata.clone(),
        samples: trace
            .samples
            .iter()
            .filter(|s| s.displacement >= onset)
            .map(|s| TraceSample {
                displacement: s.displacement - onset,
                ..*s
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterSeries {
    pub variant: String,
    /// `(bend angle deg, central diameter mm)`.
    pub points: Vec<(f64, f64)>,
}

impl DiameterSeries {
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        for w in self.points.windows(2) {
            if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
                problems.push(format!(
                    "angles must increase strictly: {} then {}",
                    w[0].0, w[1].0
                ));
            }
        }
        for &(angle, diameter) in &self.points {
            if !(0.0..=180.0).contains(&angle) {
                problems.push(format!("angle {angle} outside [0, 180]"));
            }
            if !(diameter.is_finite() && diameter > 0.0) {
                problems.push(format!(
                    "diameter at {angle} deg must be > 0, got {diameter}"
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Analysis(problems.join("; ")))
        }
    }
}

/// `diameter(angle) / diameter(0)` for every point.
pub fn diameter_ratio(series: &DiameterSeries) -> Result<Vec<(f64, f64)>> {
    series.check()?;
    let base = series
        .points
        .iter()
        .find(|p| p.0 == 0.0)
        .map(|p| p.1)
        .ok_or_else(|| {
            Error::Analysis(format!(
                "{} diameter series has no 0 deg baseline",
                series.variant
            ))
        })?;
    Ok(series
        .points
        .iter()
        .map(|&(angle, d)| (angle, if angle == 0.0 { 1.0 } else { d / base }))
        .collect())
}

/// Smallest ratio and its angle; ties go to the smaller angle.
pub fn summarize_min_ratio(series: &DiameterSeries) -> Result<(f64, f64)> {
    let ratios = diameter_ratio(series)?;
    Ok(ratios
        .into_iter()
        .reduce(|best, p| if p.1 < best.1 { p } else { best })
        .expect("baseline present"))
}

/// Metadata carried by a trial file name.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialName {
    pub variant: String,
    pub bend_angle: f64,
    pub trial: u32,
}

/// Parses `<variant>_<angle>deg_trial<k>.csv`.
pub fn parse_trial_name(file_name: &str) -> Option<TrialName> {
    let stem = file_name.strip_suffix(".csv")?;
    let (head, trial) = stem.rsplit_once("_trial")?;
    let (variant, angle) = head.rsplit_once('_')?;
    let angle = angle.strip_suffix("deg")?;
    if variant.is_empty() {
        return None;
    }
    Some(TrialName {
        variant: variant.to_string(),
        bend_angle: angle.parse().ok()?,
        trial: trial.parse().ok()?,
    })
}

pub fn trial_file_name(meta: &TraceMetadata) -> String {
    format!(
        "{}_{}deg_trial{}.csv",
        meta.variant, meta.bend_angle, meta.trial
    )
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    time_s: f64,
    displacement_mm: f64,
    #[serde(rename = "force_N")]
    force_n: f64,
    phase: String,
}

pub fn parse_trace_csv(
    text: &str,
    origin: &Path,
    metadata: TraceMetadata,
) -> Result<ForceDisplacementTrace> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for (i, row) in reader.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let phase = row
            .phase
            .parse::<Phase>()
            .map_err(|e| parse_err(format!("row {}: {e}", i + 2)))?;
        samples.push(TraceSample {
            time_s: row.time_s,
            displacement: row.displacement_mm,
            force: row.force_n,
            phase,
        });
    }
    Ok(ForceDisplacementTrace { metadata, samples })
}

pub fn write_trace_csv(trace: &ForceDisplacementTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "displacement_mm", "force_N", "phase"])
        .expect("in-memory write");
    for s in &trace.samples {
        w.write_record([
            s.time_s.to_string(),
            s.displacement.to_string(),
            s.force.to_string(),
            s.phase.label().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_band_csv(points: &[BandPoint]) -> String {
    let mut out = String::from("displacement_mm,mean_N,std_N\n");
    for p in points {
        out += &format!("{},{},{}\n", p.displacement, p.mean, p.std);
    }
    out
}

#[derive(Debug, Deserialize)]
struct DiameterRow {
    angle_deg: f64,
    diameter_mm: f64,
}

pub fn parse_diameter_csv(text: &str, origin: &Path, variant: &str) -> Result<DiameterSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let points = reader
        .deserialize::<DiameterRow>()
        .map(|r| {
            r.map(|r| (r.angle_deg, r.diameter_mm))
                .map_err(|e| Error::Parse {
                    path: origin.to_path_buf(),
                    message: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiameterSeries {
        variant: variant.to_string(),
        points,
    })
}

/// Reads every `<variant>_<angle>deg_trial<k>.csv` in `dir` and groups them
/// into sets by variant and angle. Other files are ignored.
pub fn load_trial_dir(dir: &Path, pressure_kpa: f64) -> Result<Vec<TrialSet>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut groups: BTreeMap<(String, u64), Vec<ForceDisplacementTrace>> = BTreeMap::new();
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let file_name = entry.file_name().to_string_lossy().into_owned();
        if let Some(meta) = parse_trial_name(&file_name) {
            names.push((entry.path(), meta));
        }
    }
    if names.is_empty() {
        return Err(Error::Analysis(format!(
            "no <variant>_<angle>deg_trial<k>.csv files in {}",
            dir.display()
        )));
    }
    names.sort_by(|a, b| a.0.cmp(&b.0));
    for (path, meta) in names {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let trace = parse_trace_csv(
            &text,
            &path,
            TraceMetadata {
                variant: meta.variant.clone(),
                bend_angle: meta.bend_angle,
                pressure_kpa,
                trial: meta.trial,
            },
        )?;
        groups
            .entry((meta.variant, meta.bend_angle.to_bits()))
            .or_default()
            .push(trace);
    }
    let mut sets: Vec<TrialSet> = groups
        .into_values()
        .map(|mut trials| {
            trials.sort_by_key(|t| t.metadata.trial);
            TrialSet { trials }
        })
        .collect();
    sets.sort_by(|a, b| {
        let (ma, mb) = (&a.trials[0].metadata, &b.trials[0].metadata);
        ma.variant
            .cmp(&mb.variant)
            .then(ma.bend_angle.total_cmp(&mb.bend_angle))
    });
    Ok(sets)
}

/// Thresholds and grid of a full set analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub onset_threshold: f64,
    pub zero_threshold: f64,
    pub band_step: f64,
    pub align_onset: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            onset_threshold: DEFAULT_FORCE_THRESHOLD_N,
            zero_threshold: DEFAULT_FORCE_THRESHOLD_N,
            band_step: 1.0,
            align_onset: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub variant: String,
    pub bend_angle: f64,
    pub trials: usize,
    pub max_force: ForceStats,
    pub hysteresis: ForceStats,
    pub bands: BandSeries,
}

pub fn analyze_set(set: &TrialSet, options: &AnalysisOptions) -> Result<SetMetrics> {
    set.check()?;
    let aligned = if options.align_onset {
        TrialSet {
            trials: set
                .trials
                .iter()
                .map(|t| align_contact_onset(t, options.onset_threshold))
                .collect(),
        }
    } else {
        set.clone()
    };
    let residuals = aligned
        .trials
        .iter()
        .map(|t| hysteresis_residual(t, options.zero_threshold))
        .collect::<Result<Vec<_>>>()?;
    let meta = &set.trials[0].metadata;
    Ok(SetMetrics {
        variant: meta.variant.clone(),
        bend_angle: meta.bend_angle,
        trials: set.trials.len(),
        max_force: max_resisting_force(&aligned)?,
        hysteresis: mean_std(&residuals),
        bands: band_series(&aligned, options.band_step)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterMetrics {
    pub variant: String,
    pub ratios: Vec<(f64, f64)>,
    pub min_angle: f64,
    pub min_ratio: f64,
}

pub fn analyze_diameters(series: &DiameterSeries) -> Result<DiameterMetrics> {
    let ratios = diameter_ratio(series)?;
    let (min_angle, min_ratio) = summarize_min_ratio(series)?;
    Ok(DiameterMetrics {
        variant: series.variant.clone(),
        ratios,
        min_angle,
        min_ratio,
    })
}
