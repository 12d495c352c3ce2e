//! Tool-wide settings read from a TOML file.
//!
//! ```toml
//! angle-kernel = "asin"
//! onset-threshold-n = 0.05
//! zero-force-threshold-n = 0.05
//! report-min-gap = 7.5
//!
//! [pattern]
//! hole-diameter = 0.5
//! connection-interval = 4
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PatternOptions;
use crate::sheath::AngleKernel;

/// Environment variable consulted when `--config` is absent.
pub const CONFIG_ENV: &str = "JAMLINK_CONFIG";

/// Default force threshold for contact onset and the hysteresis zero, N.
pub const DEFAULT_FORCE_THRESHOLD_N: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct Config {
    pub angle_kernel: AngleKernel,
    pub onset_threshold_n: f64,
    pub zero_force_threshold_n: f64,
    /// Central gap used for the beam-length limit in reports, mm.
    pub report_min_gap: f64,
    /// Grid step of band series written by `analyze`, mm.
    pub band_step_mm: f64,
    /// Relative error above which calibration raises a warning.
    pub calibration_warn_threshold: f64,
    pub pattern: PatternOptions,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            angle_kernel: AngleKernel::Asin,
            onset_threshold_n: DEFAULT_FORCE_THRESHOLD_N,
            zero_force_threshold_n: DEFAULT_FORCE_THRESHOLD_N,
            report_min_gap: 7.5,
            band_step_mm: 1.0,
            calibration_warn_threshold: 0.15,
            pattern: PatternOptions::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Loads `explicit`, else the file named by `JAMLINK_CONFIG`, else the
    /// defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(path) = explicit {
            return Self::load(path);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(path) if !path.is_empty() => Self::load(Path::new(&path)),
            _ => Ok(Config::default()),
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (field, value) in [
            ("onset-threshold-n", self.onset_threshold_n),
            ("zero-force-threshold-n", self.zero_force_threshold_n),
            ("report-min-gap", self.report_min_gap),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                violations.push(format!("{field} must be >= 0, got {value}"));
            }
        }
        for (field, value) in [
            ("band-step-mm", self.band_step_mm),
            (
                "calibration-warn-threshold",
                self.calibration_warn_threshold,
            ),
        ] {
            if !(value.is_finite() && value > 0.0) {
                violations.push(format!("{field} must be > 0, got {value}"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }
}
