//! TOML configuration file covering every module. All keys are optional
//! and default to the built-in values; unknown keys are rejected so
//! typos fail loudly.
//!
//! ```toml
//! [experiment]
//! sigma_list = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0]
//! episodes_per_sigma = 200
//! mode = "no_obstacles"        # or "with_obstacles"
//! method = "neurosymbolic"     # or "baseline"
//! master_seed = 5
//!
//! [planner]
//! prune_threshold = 0.5
//! goal_threshold = 0.5
//! max_depth = 12
//!
//! [executor]
//! replan_budget = 10
//! verify_threshold = 0.5
//!
//! [grounder]
//! aim_threshold_e0_mm = 2.0
//! aim_steepness_k_mm = 0.5
//! clear_threshold_d0_mm = 12.0
//! clear_steepness_k_mm = 2.0
//! aim_error_rate = 0.02
//! clear_error_rate = 0.04
//!
//! [world]
//! h_hover_mm = 30.0
//! compliance_radius_mm = 4.0
//! d_required_mm = 10.0
//! # ... every WorldConfig field is accepted
//! ```

use crate::belief::GrounderConfig;
use crate::executor::{ExecutorConfig, StackConfig};
use crate::harness::{ExperimentConfig, Method, Mode, DEFAULT_MASTER_SEED, DEFAULT_SIGMA_LIST};
use crate::planner::PlannerConfig;
use crate::simworld::WorldConfig;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// The `[experiment]` section of the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub sigma_list: Vec<f64>,
    pub episodes_per_sigma: usize,
    pub mode: Mode,
    pub method: Method,
    pub master_seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            sigma_list: DEFAULT_SIGMA_LIST.to_vec(),
            episodes_per_sigma: 200,
            mode: Mode::NoObstacles,
            method: Method::Neurosymbolic,
            master_seed: DEFAULT_MASTER_SEED,
        }
    }
}

/// The whole config file, one section per module.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: ExperimentSection,
    pub planner: PlannerConfig,
    pub executor: ExecutorConfig,
    pub grounder: GrounderConfig,
    pub world: WorldConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
        let cfg: FileConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let exp = &self.experiment;
        if exp.sigma_list.is_empty() {
            return Err(ConfigError::Invalid("sigma_list must be nonempty".into()));
        }
        if exp.sigma_list.iter().any(|&s| !(s > 0.0)) {
            return Err(ConfigError::Invalid("sigma_list values must be > 0".into()));
        }
        if exp.episodes_per_sigma == 0 {
            return Err(ConfigError::Invalid("episodes_per_sigma must be >= 1".into()));
        }
        self.grounder.validate().map_err(ConfigError::Invalid)?;
        for (name, v) in [
            ("planner.prune_threshold", self.planner.prune_threshold),
            ("planner.goal_threshold", self.planner.goal_threshold),
            ("executor.verify_threshold", self.executor.verify_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn stack(&self) -> StackConfig {
        StackConfig {
            planner: self.planner.clone(),
            executor: self.executor.clone(),
            grounder: self.grounder.clone(),
            world: self.world.clone(),
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            sigma_list: self.experiment.sigma_list.clone(),
            episodes_per_sigma: self.experiment.episodes_per_sigma,
            mode: self.experiment.mode,
            method: self.experiment.method,
            master_seed: self.experiment.master_seed,
            stack: self.stack(),
        }
    }
}
