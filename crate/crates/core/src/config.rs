//! Toolkit configuration (TOML). Every section is optional and falls back to the
//! car defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{PriorTable, DEFAULT_DEGENERATE_EPS};
use crate::metrics::DifficultyTable;
use crate::refine::IntervalSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    /// Calibration entry used as the camera.
    pub calib_key: String,
    pub camera_height: f64,
    pub reject_threshold: f64,
    pub degenerate_eps: f64,
    pub priors: PriorTable,
    pub intervals: IntervalSpec,
    pub difficulty: DifficultyTable,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            calib_key: "P2".into(),
            camera_height: 1.65,
            reject_threshold: 0.1,
            degenerate_eps: DEFAULT_DEGENERATE_EPS,
            priors: PriorTable::default(),
            intervals: IntervalSpec::default(),
            difficulty: DifficultyTable::default(),
        }
    }
}

impl ToolkitConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.priors.iter() {
            p.validate()?;
        }
        self.intervals.validate()?;
        if !(self.degenerate_eps > 0.0) {
            return Err(Error::Config("degenerate_eps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.reject_threshold) {
            return Err(Error::Config("reject_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ToolkitConfig::from_toml("").unwrap(), ToolkitConfig::default());
    }

    #[test]
    fn round_trip() {
        let cfg = ToolkitConfig::default();
        assert_eq!(ToolkitConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = ToolkitConfig::from_toml(
            r#"
reject_threshold = 0.2

[[priors]]
class_name = "Pedestrian"
w = 0.6
h = 1.75
l = 0.8
lambda = 0.02

[intervals.z]
sigma = 2.0
n_half = 8
"#,
        )
        .unwrap();
        assert_eq!(cfg.reject_threshold, 0.2);
        assert!(cfg.priors.get("Pedestrian").is_some());
        assert!(cfg.priors.get("Car").is_none());
        assert_eq!(cfg.intervals.z.n_half, 8);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ToolkitConfig::from_toml("[intervals.z]\nsigma = -1.0\nn_half = 3\n").is_err());
        assert!(ToolkitConfig::from_toml("bogus = 1\n").is_err());
    }
}
