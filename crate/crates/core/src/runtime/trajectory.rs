use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::invoke::{modal_dismiss_chain, ExecutionLog, ExecutionOutcome};
use crate::canonical::{read_json, write_canonical};
use crate::error::Result;
use crate::sim::{Action, ElementSnapshot, Observation, WebEnv};
use crate::taxonomy::FailureMode;

/// One primitive action as executed, with the element it acted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action: Action,
    /// Selector the policy wrote, for grammar-driven policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<ElementSnapshot>,
    pub result: String,
    pub url_before: String,
    pub url_after: String,
    #[serde(default)]
    pub modal_open: bool,
    /// Selectors for the open modal's dismiss control, if one was open.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dismiss_chain: Vec<String>,
}

/// Executes one action and records it.
pub fn perform(env: &mut WebEnv, action: &Action, selector: Option<String>) -> Result<(ActionRecord, Observation)> {
    let before = env.observe()?;
    let element = action
        .target
        .as_ref()
        .and_then(|t| before.element(t.as_str()))
        .cloned();
    let after = env.step(action)?;
    let record = ActionRecord {
        action: action.clone(),
        selector,
        element,
        result: after.last_action_result.clone().unwrap_or_default(),
        dismiss_chain: modal_dismiss_chain(&before).unwrap_or_default(),
        url_before: before.url,
        url_after: after.url.clone(),
        modal_open: before.modal_open,
    };
    Ok((record, after))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSource {
    InteractionSkill,
    Primitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub skill_id: String,
    pub args: BTreeMap<String, String>,
    pub outcome: ExecutionOutcome,
    pub log: ExecutionLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub url: String,
    pub observation_digest: String,
    /// Context cues present when retrieval ran.
    pub cues: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_skill: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_skill: Option<String>,
    pub source: StepSource,
    pub actions: Vec<ActionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invocation: Option<InvocationRecord>,
}

/// τ = (q, {(o_t, a_t)}, y) plus the task facts induction needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub site_id: String,
    pub task_type: String,
    pub instruction: String,
    pub start_url: String,
    pub drift_version: u32,
    pub answer_task: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_url: Option<String>,
    pub steps: Vec<StepRecord>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub visited: Vec<String>,
    #[serde(default)]
    pub gateway_calls: usize,
    /// Modes named by the guidance the policy saw, for audit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guided_modes: Vec<FailureMode>,
}

impl Trajectory {
    pub fn actions(&self) -> impl Iterator<Item = &ActionRecord> {
        self.steps.iter().flat_map(|s| s.actions.iter())
    }

    pub fn action_count(&self) -> usize {
        self.steps.iter().map(|s| s.actions.len()).sum()
    }

    pub fn invocations(&self) -> impl Iterator<Item = (&StepRecord, &InvocationRecord)> {
        self.steps.iter().filter_map(|s| s.invocation.as_ref().map(|i| (s, i)))
    }

    /// The final action was `stop` or the budget ran out.
    pub fn ended_without_answer(&self) -> bool {
        self.answer.is_none()
    }
}

pub fn trajectory_path(dir: &Path, task_id: &str) -> PathBuf {
    dir.join(format!("{task_id}.json"))
}

pub fn write_trajectory(t: &Trajectory, dir: &Path) -> Result<PathBuf> {
    let path = trajectory_path(dir, &t.task_id);
    write_canonical(t, &path)?;
    Ok(path)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    read_json(path)
}
