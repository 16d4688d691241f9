use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::llm::PromptTemplate;
use crate::simworld::SimConfig;

use super::oracle::BackendSettings;
use super::trial::TrialConfig;
use super::HarnessError;

/// Everything a run reads from its TOML config file. Every section and key is
/// optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub trial: TrialConfig,
    pub backend: BackendSettings,
    /// Prompt template file; the built-in template when absent.
    pub template: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        // Relative template paths are relative to the config file.
        if let (Some(t), Some(dir)) = (&cfg.template, path.parent()) {
            if t.is_relative() {
                cfg.template = Some(dir.join(t));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.sim.field.validate()?;
        let p = &self.sim.physics;
        if !(p.tick_hz > 0.0) || p.distance_noise_sigma < 0.0 {
            return Err(HarnessError::Config("tick_hz must be positive and distance_noise_sigma non-negative".into()));
        }
        let t = &self.trial;
        if !(t.poll_period > 0.0) || !(t.timeout > 0.0) || t.patience == 0 {
            return Err(HarnessError::Config("poll_period, timeout and patience must be positive".into()));
        }
        Ok(())
    }

    pub fn template(&self) -> Result<PromptTemplate, HarnessError> {
        Ok(match &self.template {
            Some(path) => PromptTemplate::from_file(path)?,
            None => PromptTemplate::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.trial.poll_period, 2.0);
        assert_eq!(cfg.sim.physics.tick_hz, 90.0);
    }

    #[test]
    fn partial_sections_and_unknown_keys() {
        let cfg: RunConfig = toml::from_str("[sim.physics]\ndistance_noise_sigma = 0.02\n[trial]\npoll_period = 1.0\n").unwrap();
        assert_eq!(cfg.sim.physics.distance_noise_sigma, 0.02);
        assert_eq!(cfg.sim.physics.walk_speed, 0.15);
        assert_eq!(cfg.trial.poll_period, 1.0);
        assert!(toml::from_str::<RunConfig>("[trial]\npol_period = 1.0\n").is_err());
    }

    #[test]
    fn load_resolves_template_beside_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.txt"), PromptTemplate::default().text()).unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "template = \"t.txt\"\n[trial]\ntimeout = 60.0\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.trial.timeout, 60.0);
        assert_eq!(cfg.template().unwrap(), PromptTemplate::default());
        std::fs::write(&path, "[trial]\npatience = 0\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }
}
