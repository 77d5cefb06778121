use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolutionConfig;
use crate::induction::AttributionMode;
use crate::llm::ProviderConfig;
use crate::runtime::RuntimeConfig;

/// Share of each stratum assigned to training.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.3;
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Scripted,
    Lm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Lexical,
    Lm,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

fn default_attribution() -> AttributionMode {
    AttributionMode::Rule
}

fn default_fixtures() -> PathBuf {
    PathBuf::from(".")
}

/// Everything an experiment needs, in one TOML file. Relative paths resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_attribution")]
    pub attribution: AttributionMode,
    #[serde(default)]
    pub policy: PolicyKind,
    #[serde(default)]
    pub scorer: ScorerKind,
    /// UI version the sites are served at.
    #[serde(default)]
    pub drift_version: u32,
    /// Directory holding `sites/`, `tasks/` and `policies/`.
    #[serde(default = "default_fixtures")]
    pub fixtures: PathBuf,
    pub sites: Vec<String>,
    /// Canned responses; used whenever no provider is configured.
    #[serde(default)]
    pub mock_table: Option<PathBuf>,
    #[serde(default)]
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl HarnessConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: HarnessConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction must be in (0,1), got {}", self.train_fraction)));
        }
        if self.sites.is_empty() {
            return Err(Error::Config("no sites configured".into()));
        }
        if self.runtime.step_budget == 0 {
            return Err(Error::Config("step_budget must be positive".into()));
        }
        self.evolution.validate()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn fixture_dir(&self) -> PathBuf {
        self.resolve(&self.fixtures)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = HarnessConfig::from_toml("sites = [\"a\"]", Path::new("/x")).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.train_fraction, 0.3);
        assert_eq!(cfg.attribution, AttributionMode::Rule);
        assert_eq!(cfg.runtime.step_budget, 20);
        assert_eq!(cfg.fixture_dir(), PathBuf::from("/x/."));
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(HarnessConfig::from_toml("sites = [\"a\"]\ntrain_fraction = 1.0", Path::new(".")).is_err());
        assert!(HarnessConfig::from_toml("sites = []", Path::new(".")).is_err());
        assert!(HarnessConfig::from_toml("sites = [\"a\"]\nbogus = 1", Path::new(".")).is_err());
        let err = HarnessConfig::from_toml("sites = [\"a\"]\n[evolution]\nmax_patch_failures = 0", Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("max_patch_failures"));
    }
}
