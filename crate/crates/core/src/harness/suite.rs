use std::collections::BTreeMap;
use std::sync::Arc;

use super::config::{HarnessConfig, PolicyKind, ScorerKind};
use crate::error::{Error, Result};
use crate::llm::{Gateway, MockGateway, RemoteGateway, RoleTag};
use crate::retrieval::{GatewayScorer, LexicalScorer, SemanticScorer};
use crate::runtime::{run_episode, Agent, LmPolicy, Policy, PolicyScript, ScriptedPolicy, Trajectory};
use crate::sim::task::FailureLabel;
use crate::sim::{load_site, Task, TaskSet, WebEnv};
use crate::skill::SkillLibrary;

/// Loaded sites, tasks and the pluggable agent parts for one experiment.
pub struct Harness {
    pub config: HarnessConfig,
    pub envs: BTreeMap<String, WebEnv>,
    pub tasks: Vec<Task>,
    pub gateway: Arc<dyn Gateway>,
    policy: Box<dyn Policy>,
    scorer: Box<dyn SemanticScorer + Send + Sync>,
}

fn build_gateway(cfg: &HarnessConfig) -> Result<Arc<dyn Gateway>> {
    if let Some(p) = &cfg.provider {
        return Ok(Arc::new(RemoteGateway::new(p.clone())?));
    }
    let mock = match &cfg.mock_table {
        Some(path) => MockGateway::load(&cfg.resolve(path))?,
        None => MockGateway::default().with_default(RoleTag::Policy, "stop()"),
    };
    Ok(Arc::new(mock))
}

impl Harness {
    pub fn load(config: HarnessConfig) -> Result<Self> {
        let dir = config.fixture_dir();
        let mut envs = BTreeMap::new();
        let mut tasks = Vec::new();
        let mut scripts = Vec::new();
        for site in &config.sites {
            let mut env = load_site(dir.join("sites").join(format!("{site}.json")))?;
            if config.drift_version != 0 {
                env.apply_drift(config.drift_version)?;
            }
            let set = TaskSet::load(dir.join("tasks").join(format!("{site}.json")))?;
            if set.site_id != *site {
                return Err(Error::Config(format!("task file for {site} names site {}", set.site_id)));
            }
            for t in &set.tasks {
                t.validate_against(env.site())?;
            }
            tasks.extend(set.tasks);
            if config.policy == PolicyKind::Scripted {
                scripts.push(PolicyScript::load(&dir.join("policies").join(format!("{site}.json")))?);
            }
            envs.insert(site.clone(), env);
        }
        tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let gateway = build_gateway(&config)?;
        let policy: Box<dyn Policy> = match config.policy {
            PolicyKind::Scripted => Box::new(ScriptedPolicy::new(scripts)),
            PolicyKind::Lm => Box::new(LmPolicy::new(gateway.clone())),
        };
        let scorer: Box<dyn SemanticScorer + Send + Sync> = match config.scorer {
            ScorerKind::Lexical => Box::new(LexicalScorer),
            ScorerKind::Lm => Box::new(GatewayScorer { gateway: gateway.clone() }),
        };
        Ok(Self { config, envs, tasks, gateway, policy, scorer })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::load(HarnessConfig::load(path)?)
    }

    /// Serves every site at a drift version from now on.
    pub fn apply_drift(&mut self, version: u32) -> Result<()> {
        for env in self.envs.values_mut() {
            env.apply_drift(version)?;
        }
        self.config.drift_version = version;
        Ok(())
    }

    pub fn task(&self, task_id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Ground-truth failure labels by task id.
    pub fn labels(&self) -> BTreeMap<String, FailureLabel> {
        self.tasks
            .iter()
            .filter_map(|t| t.failure_label.clone().map(|l| (t.task_id.clone(), l)))
            .collect()
    }

    pub fn env_for(&self, site_id: &str) -> Result<WebEnv> {
        self.envs
            .get(site_id)
            .cloned()
            .ok_or_else(|| Error::Config(format!("site {site_id} is not loaded")))
    }

    pub fn agent(&self) -> Agent<'_> {
        Agent {
            policy: self.policy.as_ref(),
            scorer: self.scorer.as_ref(),
            gateway: Some(self.gateway.as_ref()),
            config: self.config.runtime.clone(),
        }
    }

    /// One episode per task, each on a fresh copy of its site.
    pub fn run_episodes(&self, tasks: &[Task], library: &SkillLibrary) -> Result<Vec<Trajectory>> {
        let agent = self.agent();
        tasks
            .iter()
            .map(|t| {
                let mut env = self.env_for(&t.site_id)?;
                run_episode(&mut env, t, library, &agent)
            })
            .collect()
    }
}
