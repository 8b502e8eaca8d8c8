//! Experiment configuration and its TOML file form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, AttackKind};
use crate::diffusion::{ScheduleConfig, ToyArchitecture, TrainingConfig};
use crate::error::{Error, Result};

use super::dataset::DatasetSpec;
use super::seed::derive_seed;

fn default_boundary_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Radius separating low from high frequencies in `hf_content`.
    #[serde(default = "default_boundary_radius")]
    pub boundary_radius: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            boundary_radius: default_boundary_radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub model: ToyArchitecture,
    pub training: TrainingConfig,
    pub attacks: Vec<AttackConfig>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            dataset: DatasetSpec::default(),
            schedule: ScheduleConfig::default(),
            model: ToyArchitecture::default(),
            training: TrainingConfig::default(),
            attacks: AttackKind::ALL.iter().map(|&k| AttackConfig::default_for(k)).collect(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let seed = cfg.seed;
        Ok(cfg.with_seed(seed))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    /// Reads a config file. An unreadable file is a configuration error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets the global seed and re-derives every sub-seed from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dataset.seed = derive_seed(seed, "dataset", "");
        self.training.seed = derive_seed(seed, "training", "");
        for a in &mut self.attacks {
            a.seed = derive_seed(seed, "attack", a.kind.name());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        let sched = self.schedule.build()?;
        self.model.validate()?;
        self.training.validate()?;
        if self.attacks.is_empty() {
            return Err(Error::Config("no attacks configured".into()));
        }
        let mut seen = Vec::new();
        for a in &self.attacks {
            if seen.contains(&a.kind) {
                return Err(Error::Config(format!("attack {} listed twice", a.kind)));
            }
            seen.push(a.kind);
            a.validate(&sched)?;
        }
        let r = self.evaluation.boundary_radius;
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Config(format!("boundary_radius must be non-negative, got {r}")));
        }
        Ok(())
    }
}
