//! Least-squares calibration of the resisting-force model against measured
//! peak forces.
//!
//! The objective is the sum of squared relative residuals. A coarse grid
//! over the free parameters seeds a bounded Levenberg-Marquardt descent,
//! which is then polished by coordinate golden-section line searches.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{buckled, predict_max_force, LinkVariant, StiffnessModelParams, VariantKind};
use crate::error::{Error, Result};
use crate::sheath::JammingState;

/// Upper bound on grid-seed evaluations.
const SEED_BUDGET: usize = 20_000;
const REFINE_SWEEPS: usize = 80;
const GOLDEN_ITERATIONS: usize = 60;
const LM_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub variant: LinkVariant,
    pub bend_angle: f64,
    pub measured_max_force: f64,
}

/// A model parameter the fit may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "parameter", content = "variant")]
pub enum FreeParameter {
    JamStiffnessScale,
    ForceScale(VariantKind),
    BendGain(VariantKind),
    BucklingKnockdown,
    GranularStiffness,
}

impl FreeParameter {
    fn bounds(self) -> (f64, f64) {
        match self {
            FreeParameter::JamStiffnessScale => (0.0, 2.0),
            FreeParameter::ForceScale(_) => (0.01, 2.0),
            FreeParameter::BendGain(_) => (0.0, 5.0),
            FreeParameter::BucklingKnockdown => (0.01, 1.0),
            FreeParameter::GranularStiffness => (0.001, 10.0),
        }
    }

    pub fn get(self, p: &StiffnessModelParams) -> f64 {
        match self {
            FreeParameter::JamStiffnessScale => p.jam_stiffness_scale,
            FreeParameter::ForceScale(kind) => p.variants.get(kind).force_scale,
            FreeParameter::BendGain(kind) => p.variants.get(kind).bend_gain,
            FreeParameter::BucklingKnockdown => p.buckling_force_knockdown,
            FreeParameter::GranularStiffness => p.granular_stiffness.unwrap_or(1.0),
        }
    }

    fn set(self, p: &mut StiffnessModelParams, value: f64) {
        match self {
            FreeParameter::JamStiffnessScale => p.jam_stiffness_scale = value,
            FreeParameter::ForceScale(kind) => p.variants.get_mut(kind).force_scale = value,
            FreeParameter::BendGain(kind) => p.variants.get_mut(kind).bend_gain = value,
            FreeParameter::BucklingKnockdown => p.buckling_force_knockdown = value,
            FreeParameter::GranularStiffness => p.granular_stiffness = Some(value),
        }
    }
}

impl fmt::Display for FreeParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreeParameter::JamStiffnessScale => f.write_str("jam_stiffness_scale"),
            FreeParameter::ForceScale(kind) => write!(f, "variants.{kind}.force_scale"),
            FreeParameter::BendGain(kind) => write!(f, "variants.{kind}.bend_gain"),
            FreeParameter::BucklingKnockdown => f.write_str("buckling_force_knockdown"),
            FreeParameter::GranularStiffness => f.write_str("granular_stiffness"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResidual {
    pub variant: VariantKind,
    pub bend_angle: f64,
    pub measured: f64,
    pub predicted: f64,
    /// `(predicted - measured) / measured`.
    pub relative_error: f64,
    pub buckled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: StiffnessModelParams,
    pub free_parameters: Vec<FreeParameter>,
    pub residuals: Vec<TargetResidual>,
    pub max_relative_error: f64,
    /// Sum of squared relative residuals.
    pub objective: f64,
}

/// Picks the parameters the targets can identify.
///
/// The layer family shares `jam_stiffness_scale`; when both layer variants
/// are present the spine variant gets its own force scale. A bend gain is
/// freed for every variant with an unbuckled target above 0 deg, and the
/// buckling knockdown when any target is predicted to buckle.
pub fn default_free_parameters(
    targets: &[CalibrationTarget],
    base: &StiffnessModelParams,
) -> Vec<FreeParameter> {
    let has = |kind| targets.iter().any(|t| t.variant.kind == kind);
    let mut free = Vec::new();
    if has(VariantKind::Layer) || has(VariantKind::LayerWithSpine) {
        free.push(FreeParameter::JamStiffnessScale);
    }
    if has(VariantKind::Layer) && has(VariantKind::LayerWithSpine) {
        free.push(FreeParameter::ForceScale(VariantKind::LayerWithSpine));
    }
    if has(VariantKind::Granular) {
        free.push(FreeParameter::GranularStiffness);
    }
    for kind in VariantKind::ALL {
        let bends = targets.iter().any(|t| {
            t.variant.kind == kind && t.bend_angle > 0.0 && !buckled(&t.variant, t.bend_angle, base)
        });
        if bends {
            free.push(FreeParameter::BendGain(kind));
        }
    }
    if targets
        .iter()
        .any(|t| buckled(&t.variant, t.bend_angle, base))
    {
        free.push(FreeParameter::BucklingKnockdown);
    }
    free
}

/// Fits the model to `targets` using [`default_free_parameters`].
pub fn calibrate(
    targets: &[CalibrationTarget],
    state: &JammingState,
    base: &StiffnessModelParams,
) -> Result<CalibrationResult> {
    let free = default_free_parameters(targets, base);
    calibrate_with(targets, state, base, &free)
}

/// Fits the listed parameters, holding every other field of `base` fixed.
pub fn calibrate_with(
    targets: &[CalibrationTarget],
    state: &JammingState,
    base: &StiffnessModelParams,
    free: &[FreeParameter],
) -> Result<CalibrationResult> {
    if targets.is_empty() {
        return Err(Error::Calibration("no calibration targets".to_string()));
    }
    if free.is_empty() {
        return Err(Error::Calibration("no free parameters to fit".to_string()));
    }
    if targets.len() < free.len() {
        return Err(Error::Calibration(format!(
            "{} targets cannot determine {} free parameters",
            targets.len(),
            free.len()
        )));
    }
    for t in targets {
        if !(t.measured_max_force.is_finite() && t.measured_max_force > 0.0) {
            return Err(Error::Calibration(format!(
                "measured force must be > 0, got {} for {} at {} deg",
                t.measured_max_force, t.variant.kind, t.bend_angle
            )));
        }
        t.variant.check()?;
    }
    state.check()?;
    base.check()?;

    let problem = Problem {
        targets,
        state,
        base,
        free,
    };
    let start = problem.grid_seed()?;
    let descended = problem.levenberg_marquardt(start)?;
    let best = problem.refine(descended)?;
    problem.finish(&best)
}

struct Problem<'a> {
    targets: &'a [CalibrationTarget],
    state: &'a JammingState,
    base: &'a StiffnessModelParams,
    free: &'a [FreeParameter],
}

impl Problem<'_> {
    fn params(&self, x: &[f64]) -> StiffnessModelParams {
        let mut p = self.base.clone();
        for (param, &value) in self.free.iter().zip(x) {
            param.set(&mut p, value);
        }
        p
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        let params = self.params(x);
        self.targets
            .iter()
            .map(|t| {
                let predicted = predict_max_force(&t.variant, t.bend_angle, self.state, &params)?;
                Ok((predicted - t.measured_max_force) / t.measured_max_force)
            })
            .collect()
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.residuals(x)?.iter().map(|r| r * r).sum())
    }

    /// Damped Gauss-Newton steps on the relative residuals, clamped to the
    /// parameter bounds. Forward-difference Jacobian.
    fn levenberg_marquardt(&self, mut x: Vec<f64>) -> Result<Vec<f64>> {
        let bounds: Vec<_> = self.free.iter().map(|p| p.bounds()).collect();
        let n = x.len();
        let m = self.targets.len();
        let mut r = DVector::from_vec(self.residuals(&x)?);
        let mut fx = r.norm_squared();
        let mut lambda = 1e-3;
        for _ in 0..LM_ITERATIONS {
            let mut jac = DMatrix::zeros(m, n);
            for j in 0..n {
                let (lo, hi) = bounds[j];
                let h = 1e-7 * (hi - lo);
                let mut xp = x.clone();
                // Step inwards at the upper bound.
                let h = if xp[j] + h > hi { -h } else { h };
                xp[j] += h;
                let rp = DVector::from_vec(self.residuals(&xp)?);
                jac.set_column(j, &((rp - &r) / h));
            }
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * &r;
            let mut improved = false;
            while lambda < 1e12 {
                let mut a = jtj.clone();
                for k in 0..n {
                    a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
                }
                let Some(step) = a.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = (0..n)
                    .map(|k| (x[k] + step[k]).clamp(bounds[k].0, bounds[k].1))
                    .collect();
                let rt = DVector::from_vec(self.residuals(&trial)?);
                let ft = rt.norm_squared();
                if ft < fx {
                    x = trial;
                    r = rt;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = fx - ft > 1e-15 * fx.max(1e-300);
                    fx = ft;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        Ok(x)
    }

    fn grid_seed(&self) -> Result<Vec<f64>> {
        let dims = self.free.len();
        let per_dim = ((SEED_BUDGET as f64).powf(1.0 / dims as f64).floor() as usize).clamp(3, 41);
        let total = per_dim.pow(dims as u32);
        let bounds: Vec<_> = self.free.iter().map(|p| p.bounds()).collect();
        let point = |mut index: usize| -> Vec<f64> {
            bounds
                .iter()
                .map(|&(lo, hi)| {
                    let k = index % per_dim;
                    index /= per_dim;
                    lo + (hi - lo) * k as f64 / (per_dim - 1) as f64
                })
                .collect()
        };

        // Ties resolve towards the lowest grid index, so the reduction is
        // independent of scheduling.
        let best = (0..total)
            .into_par_iter()
            .map(|i| self.objective(&point(i)).map(|f| (f, i)))
            .try_reduce(
                || (f64::INFINITY, usize::MAX),
                |a, b| Ok(if (b.0, b.1) < (a.0, a.1) { b } else { a }),
            )?;
        Ok(point(best.1))
    }

    fn refine(&self, mut x: Vec<f64>) -> Result<Vec<f64>> {
        let bounds: Vec<_> = self.free.iter().map(|p| p.bounds()).collect();
        let mut bracket: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo) / 4.0).collect();
        let mut fx = self.objective(&x)?;
        for _ in 0..REFINE_SWEEPS {
            for i in 0..x.len() {
                let (lo, hi) = bounds[i];
                let a = (x[i] - bracket[i]).max(lo);
                let b = (x[i] + bracket[i]).min(hi);
                let mut trial = x.clone();
                let (xi, fi) = golden_section(a, b, |v| {
                    trial[i] = v;
                    self.objective(&trial)
                })?;
                if fi < fx {
                    x[i] = xi;
                    fx = fi;
                }
            }
            bracket.iter_mut().for_each(|h| *h *= 0.5);
        }
        Ok(x)
    }

    fn finish(&self, x: &[f64]) -> Result<CalibrationResult> {
        let params = self.params(x);
        let mut residuals = Vec::with_capacity(self.targets.len());
        for t in self.targets {
            let predicted = predict_max_force(&t.variant, t.bend_angle, self.state, &params)?;
            residuals.push(TargetResidual {
                variant: t.variant.kind,
                bend_angle: t.bend_angle,
                measured: t.measured_max_force,
                predicted,
                relative_error: (predicted - t.measured_max_force) / t.measured_max_force,
                buckled: buckled(&t.variant, t.bend_angle, &params),
            });
        }
        let max_relative_error = residuals
            .iter()
            .map(|r| r.relative_error.abs())
            .fold(0.0, f64::max);
        let objective = residuals.iter().map(|r| r.relative_error.powi(2)).sum();
        Ok(CalibrationResult {
            params,
            free_parameters: self.free.to_vec(),
            residuals,
            max_relative_error,
            objective,
        })
    }
}

/// Minimises `f` on `[a, b]`; returns the best point seen and its value.
fn golden_section(
    mut a: f64,
    mut b: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..GOLDEN_ITERATIONS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    for end in [a, b] {
        let fe = f(end)?;
        if fe < best.1 {
            best = (end, fe);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheath::FlapPattern;
    use crate::spine::SpineDesign;

    fn target(variant: LinkVariant, angle: f64, force: f64) -> CalibrationTarget {
        CalibrationTarget {
            variant,
            bend_angle: angle,
            measured_max_force: force,
        }
    }

    fn layer() -> LinkVariant {
        LinkVariant::layer(FlapPattern::reference_design())
    }

    #[test]
    fn single_target_fits_exactly() {
        let targets = [target(layer(), 0.0, 11.41)];
        let base = StiffnessModelParams::default();
        let fit = calibrate(&targets, &JammingState::reference(), &base).unwrap();
        assert_eq!(fit.free_parameters, [FreeParameter::JamStiffnessScale]);
        assert!(fit.max_relative_error < 1e-9, "{}", fit.max_relative_error);
    }

    #[test]
    fn granular_triple() {
        let g = LinkVariant::granular();
        let targets = [
            target(g.clone(), 0.0, 2.76),
            target(g.clone(), 90.0, 7.14),
            target(g, 180.0, 11.55),
        ];
        let fit = calibrate(
            &targets,
            &JammingState::reference(),
            &StiffnessModelParams::default(),
        )
        .unwrap();
        assert!(fit.max_relative_error <= 0.15);
        let forces: Vec<_> = fit.residuals.iter().map(|r| r.predicted).collect();
        assert!(forces.windows(2).all(|w| w[0] < w[1]), "{forces:?}");
    }

    #[test]
    fn empty_targets_rejected() {
        let err = calibrate(
            &[],
            &JammingState::reference(),
            &StiffnessModelParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }

    #[test]
    fn underdetermined_rejected() {
        let targets = [target(layer(), 90.0, 15.0)];
        let err = calibrate_with(
            &targets,
            &JammingState::reference(),
            &StiffnessModelParams::default(),
            &[
                FreeParameter::JamStiffnessScale,
                FreeParameter::BendGain(VariantKind::Layer),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }

    #[test]
    fn default_free_set_for_full_data() {
        let s = LinkVariant::layer_with_spine(
            FlapPattern::reference_design(),
            SpineDesign::reference_design(),
        );
        let targets = [
            target(layer(), 0.0, 11.41),
            target(layer(), 90.0, 15.92),
            target(layer(), 180.0, 10.33),
            target(s.clone(), 0.0, 5.12),
            target(s.clone(), 90.0, 16.02),
            target(s, 180.0, 31.33),
        ];
        let free = default_free_parameters(&targets, &StiffnessModelParams::default());
        assert_eq!(
            free,
            [
                FreeParameter::JamStiffnessScale,
                FreeParameter::ForceScale(VariantKind::LayerWithSpine),
                FreeParameter::BendGain(VariantKind::Layer),
                FreeParameter::BendGain(VariantKind::LayerWithSpine),
                FreeParameter::BucklingKnockdown,
            ]
        );
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(-3.0, 5.0, |v| Ok((v - 1.25).powi(2))).unwrap();
        assert!((x - 1.25).abs() < 1e-9);
        assert!(fx < 1e-18);
    }
}
