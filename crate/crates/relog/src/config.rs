//! Run configuration, loaded from TOML or JSON and overridden by flags.

use std::path::{Path, PathBuf};

use relog_core::{Rubric, SufficiencyRule};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::remote::{RemoteConfig, RemoteProvider};
use crate::gateway::replay::{ReplayProvider, ReplayStore};
use crate::gateway::stub::{CriticMode, FixerMode, StubConfig, StubProvider};
use crate::gateway::{Gateway, TemplateSet, DEFAULT_RETRY_LIMIT};
use crate::pipeline::{LoopConfig, DEFAULT_FIX_BUDGET, DEFAULT_GOAL, DEFAULT_MAX_ITERATIONS};
use crate::profile::ToolchainProfile;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderChoice {
    #[default]
    Stub,
    Replay,
    Remote,
}

/// Settings for the rule-based provider that apply to every run. Instance
/// manifests add key variables and expectations on top.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubSettings {
    #[serde(default)]
    pub critic: CriticMode,
    #[serde(default)]
    pub fixer: FixerMode,
    /// Overrides the per-instance setting when present.
    #[serde(default)]
    pub inject_broken: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub kind: ProviderChoice,
    #[serde(default)]
    pub remote: Option<RemoteConfig>,
    /// Recorded answers to replay from.
    #[serde(default)]
    pub replay_dir: Option<PathBuf>,
    /// Where to record validated answers.
    #[serde(default)]
    pub record_dir: Option<PathBuf>,
    #[serde(default)]
    pub stub: StubSettings,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_fix_budget")]
    pub fix_budget: u32,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
}

fn default_max_iterations() -> u32 {
    DEFAULT_MAX_ITERATIONS
}
fn default_fix_budget() -> u32 {
    DEFAULT_FIX_BUDGET
}
fn default_retry_limit() -> u32 {
    DEFAULT_RETRY_LIMIT
}

impl Default for Budgets {
    fn default() -> Self {
        Self { max_iterations: DEFAULT_MAX_ITERATIONS, fix_budget: DEFAULT_FIX_BUDGET, retry_limit: DEFAULT_RETRY_LIMIT }
    }
}

fn default_goal() -> String {
    DEFAULT_GOAL.into()
}

fn default_output() -> PathBuf {
    PathBuf::from("relog-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Toolchain profile file; the built-in rustc profile when absent.
    #[serde(default)]
    pub toolchain: Option<PathBuf>,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub ablate_fixer: bool,
    #[serde(default)]
    pub ablate_refine: bool,
    #[serde(default)]
    pub rubric: Rubric,
    #[serde(default)]
    pub rule: SufficiencyRule,
    #[serde(default = "default_goal")]
    pub goal: String,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Instances evaluated at once.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            toolchain: None,
            provider: ProviderConfig::default(),
            budgets: Budgets::default(),
            ablate_fixer: false,
            ablate_refine: false,
            rubric: Rubric::default(),
            rule: SufficiencyRule::default(),
            goal: default_goal(),
            output_dir: default_output(),
            jobs: 1,
        }
    }
}

impl RunConfig {
    /// JSON for `.json` files, TOML otherwise. Relative paths inside the file
    /// are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let parse_err = |message: String| ConfigError::Parse { path: path.into(), message };
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.toolchain.as_mut().map(fix);
        cfg.provider.replay_dir.as_mut().map(fix);
        cfg.provider.record_dir.as_mut().map(fix);
        cfg.provider.templates_dir.as_mut().map(fix);
        fix(&mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = &self.budgets;
        if b.max_iterations == 0 || b.fix_budget == 0 {
            return Err(ConfigError::Invalid("max_iterations and fix_budget must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be positive".into()));
        }
        if self.rubric.dimensions.is_empty() {
            return Err(ConfigError::Invalid("the rubric needs at least one dimension".into()));
        }
        match self.provider.kind {
            ProviderChoice::Replay if self.provider.replay_dir.is_none() => {
                Err(ConfigError::Invalid("the replay provider needs replay_dir".into()))
            }
            ProviderChoice::Remote if self.provider.remote.is_none() => {
                Err(ConfigError::Invalid("the remote provider needs a [provider.remote] table".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn toolchain_profile(&self) -> Result<ToolchainProfile, crate::profile::ProfileError> {
        match &self.toolchain {
            Some(p) => ToolchainProfile::load(p),
            None => Ok(ToolchainProfile::rustc()),
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            max_iterations: self.budgets.max_iterations,
            fix_budget: self.budgets.fix_budget,
            ablate_fixer: self.ablate_fixer,
            ablate_refine: self.ablate_refine,
            rubric: self.rubric.clone(),
            rule: self.rule,
            goal: self.goal.clone(),
        }
    }

    /// A gateway for one subject. `stub` carries the subject's own key
    /// variables and expectations and is only used by the stub provider.
    pub fn gateway(&self, stub: &StubConfig, toolchain: &ToolchainProfile) -> Result<Gateway, ConfigError> {
        let p = &self.provider;
        let provider: Box<dyn crate::gateway::Provider> = match p.kind {
            ProviderChoice::Stub => {
                let mut cfg = stub.clone();
                cfg.critic = p.stub.critic;
                cfg.fixer = p.stub.fixer;
                if let Some(b) = p.stub.inject_broken {
                    cfg.inject_broken = b;
                }
                Box::new(
                    StubProvider::new(cfg, &toolchain.render)
                        .map_err(|e| ConfigError::Invalid(format!("method pattern: {e}")))?,
                )
            }
            ProviderChoice::Replay => {
                let dir = p.replay_dir.clone().ok_or_else(|| ConfigError::Invalid("replay_dir is not set".into()))?;
                let store = ReplayStore::open(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Box::new(ReplayProvider::new(store))
            }
            ProviderChoice::Remote => {
                let remote = p.remote.clone().ok_or_else(|| ConfigError::Invalid("remote settings are missing".into()))?;
                Box::new(RemoteProvider::from_env(remote).map_err(|e| ConfigError::Invalid(e.to_string()))?)
            }
        };
        let mut gw = Gateway::new(provider).with_retry_limit(self.budgets.retry_limit);
        if let Some(dir) = &p.templates_dir {
            let set = TemplateSet::builtin().with_overrides(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            gw = gw.with_templates(set);
        }
        if let Some(dir) = &p.record_dir {
            gw = gw.recording_to(ReplayStore::open(dir.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        Ok(gw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.budgets.max_iterations, 5);
        assert_eq!(cfg.budgets.fix_budget, 3);
    }

    #[test]
    fn rejects_zero_budgets_and_incomplete_providers() {
        let mut cfg = RunConfig::default();
        cfg.budgets.fix_budget = 0;
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = toml::from_str("[provider]\nkind = \"remote\"\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = toml::from_str("[provider]\nkind = \"replay\"\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parses_remote_table() {
        let cfg: RunConfig = toml::from_str(
            "[provider]\nkind = \"remote\"\n[provider.remote]\nbase_url = \"http://localhost:1/v1\"\nmodel = \"m\"\napi_key_env = \"KEY\"\n",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.provider.remote.unwrap().api_key_env, "KEY");
    }
}
