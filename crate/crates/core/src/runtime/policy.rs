//! Primitive action policies: fixture-scripted rules for CI and a gateway-backed
//! language-model policy speaking the action grammar.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grammar::{parse_action, GrammarAction};
use super::trajectory::ActionRecord;
use crate::canonical::read_json;
use crate::error::{Error, Result};
use crate::induction::templates::modes_in_guidance;
use crate::llm::{Gateway, PromptRequest, RoleTag};
use crate::sim::site::glob_match;
use crate::sim::{Action, ActionKind, ElementRef, Observation, Page, Task};
use crate::taxonomy::FailureMode;

pub struct PolicyInput<'a> {
    pub task: &'a Task,
    pub obs: &'a Observation,
    pub page: &'a Page,
    /// Reasoning guidance block; empty when no skill was selected.
    pub guidance: &'a str,
    pub history: &'a [ActionRecord],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    pub selector: Option<String>,
}

pub trait Policy: Send + Sync {
    fn decide(&self, input: &PolicyInput<'_>) -> Result<Decision>;
}

/// One primitive action from the policy.
pub fn primitive_step(policy: &dyn Policy, input: &PolicyInput<'_>) -> Result<Decision> {
    policy.decide(input)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    #[serde(default)]
    pub url: Option<String>,
    /// `"*"` non-empty, `""` empty, otherwise equal (case-insensitive).
    #[serde(default)]
    pub state: BTreeMap<String, String>,
    /// Guidance must name this mode.
    #[serde(default)]
    pub mode: Option<FailureMode>,
    #[serde(default)]
    pub not_mode: Option<FailureMode>,
    #[serde(default)]
    pub modal: Option<bool>,
    #[serde(default)]
    pub last_result: Option<String>,
    #[serde(default)]
    pub not_last_result: Option<String>,
    /// Element keys that must be present (may use `{var:X}`).
    #[serde(default)]
    pub present: Vec<String>,
    #[serde(default)]
    pub absent: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTemplate {
    pub action: ActionKind,
    #[serde(default)]
    pub element: Option<String>,
    /// May use `{var:X}` and `{read:KEY}` (element text).
    #[serde(default)]
    pub payload: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(default)]
    pub when: Condition,
    pub act: ActionTemplate,
}

/// Ordered rules per task type; the first rule whose condition holds fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyScript {
    pub site_id: String,
    pub families: BTreeMap<String, Vec<Rule>>,
}

impl PolicyScript {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

fn requirement_holds(value: Option<&String>, want: &str) -> bool {
    let v = value.map(|s| s.trim()).unwrap_or("");
    match want {
        "*" => !v.is_empty(),
        "" => v.is_empty(),
        w => v.eq_ignore_ascii_case(w),
    }
}

fn expand(template: &str, vars: &BTreeMap<String, String>, obs: Option<&Observation>) -> String {
    let mut s = template.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{var:{k}}}"), v);
    }
    if let Some(obs) = obs {
        while let Some(start) = s.find("{read:") {
            let Some(len) = s[start..].find('}') else { break };
            let key = &s[start + 6..start + len];
            let text = obs.element(key).and_then(|e| e.text.clone()).unwrap_or_default();
            s.replace_range(start..start + len + 1, &text);
        }
    }
    s
}

/// Deterministic per-family scripts keyed by task type; tasks supply `vars`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    scripts: BTreeMap<String, PolicyScript>,
}

impl ScriptedPolicy {
    pub fn new(scripts: impl IntoIterator<Item = PolicyScript>) -> Self {
        Self {
            scripts: scripts.into_iter().map(|s| (s.site_id.clone(), s)).collect(),
        }
    }

    fn holds(c: &Condition, input: &PolicyInput<'_>, modes: &[FailureMode]) -> bool {
        let vars = &input.task.vars;
        let obs = input.obs;
        c.url.as_deref().map_or(true, |g| glob_match(g, &obs.url))
            && c.state.iter().all(|(k, want)| requirement_holds(obs.state_view.get(k), want))
            && c.mode.map_or(true, |m| modes.contains(&m))
            && c.not_mode.map_or(true, |m| !modes.contains(&m))
            && c.modal.map_or(true, |m| obs.modal_open == m)
            && c.last_result.as_deref().map_or(true, |r| obs.last_action_result.as_deref() == Some(r))
            && c.not_last_result.as_deref().map_or(true, |r| obs.last_action_result.as_deref() != Some(r))
            && c.present.iter().all(|k| obs.element(&expand(k, vars, None)).is_some())
            && c.absent.iter().all(|k| obs.element(&expand(k, vars, None)).is_none())
    }
}

impl Policy for ScriptedPolicy {
    fn decide(&self, input: &PolicyInput<'_>) -> Result<Decision> {
        let task = input.task;
        let script = self
            .scripts
            .get(&task.site_id)
            .ok_or_else(|| Error::Config(format!("no policy script for site {}", task.site_id)))?;
        let rules = script.families.get(&task.task_type).map(Vec::as_slice).unwrap_or(&[]);
        let modes = modes_in_guidance(input.guidance);
        let Some(rule) = rules.iter().find(|r| Self::holds(&r.when, input, &modes)) else {
            return Ok(Decision { action: Action::stop(), selector: None });
        };
        let t = &rule.act;
        let action = Action {
            kind: t.action,
            target: t.element.as_deref().map(|e| ElementRef::new(expand(e, &task.vars, None))),
            payload: t.payload.as_deref().map(|p| expand(p, &task.vars, Some(input.obs))),
        };
        Ok(Decision { action, selector: None })
    }
}

pub const LM_SYSTEM_PROMPT: &str = "You operate a web browser to complete a task. Reply with exactly one action: \
click(<selector>), type(<selector>, \"<text>\"), select(<selector>, \"<option>\"), submit(<selector>), \
goto(\"<url>\"), answer(\"<text>\") or stop(). Selectors: #id, .class, tag, [attr=value], text=\"...\", label~\"...\".";

/// Prompt text shown to a language-model policy.
pub fn render_prompt(input: &PolicyInput<'_>) -> String {
    let obs = input.obs;
    let mut out = String::new();
    if !input.guidance.is_empty() {
        out.push_str(input.guidance);
        out.push_str("\n\n");
    }
    out.push_str(&format!("Task: {}\nURL: {}\nTitle: {}\n", input.task.instruction, obs.url, obs.title));
    if let Some(r) = &obs.last_action_result {
        out.push_str(&format!("Last result: {r}\n"));
    }
    out.push_str("Elements:\n");
    for e in &obs.page_snapshot {
        let mut line = format!("- {}", e.tag);
        if let Some(id) = &e.id {
            line.push_str(&format!("#{id}"));
        }
        for c in &e.classes {
            line.push_str(&format!(".{c}"));
        }
        if let Some(l) = &e.label {
            line.push_str(&format!(" label={l:?}"));
        }
        if let Some(t) = &e.text {
            line.push_str(&format!(" text={t:?}"));
        }
        if let Some(v) = obs.state_view.get(e.key.as_str()) {
            line.push_str(&format!(" value={v:?}"));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub struct LmPolicy {
    gateway: Arc<dyn Gateway>,
    /// Action used when two replies in a row are unparseable.
    pub fallback: GrammarAction,
}

impl LmPolicy {
    pub fn new(gateway: Arc<dyn Gateway>) -> Self {
        Self {
            gateway,
            fallback: GrammarAction { kind: ActionKind::Stop, selector: None, text: None },
        }
    }

    pub fn with_fallback(mut self, fallback: GrammarAction) -> Self {
        self.fallback = fallback;
        self
    }
}

impl Policy for LmPolicy {
    fn decide(&self, input: &PolicyInput<'_>) -> Result<Decision> {
        let user = render_prompt(input);
        let mut request = PromptRequest::new(RoleTag::Policy, LM_SYSTEM_PROMPT, user.clone());
        let mut parsed = None;
        for attempt in 0..2 {
            if attempt == 1 {
                request.user_text = format!("{user}\nYour previous reply was not a valid action. Reply with one action only.");
            }
            let reply = self.gateway.complete(&request)?;
            match parse_action(&reply) {
                Ok(a) => {
                    parsed = Some(a);
                    break;
                }
                Err(e) => log::debug!("unparseable policy reply {reply:?}: {e}"),
            }
        }
        let ga = parsed.unwrap_or_else(|| {
            log::info!("policy fell back to {}", self.fallback);
            self.fallback.clone()
        });
        Ok(Decision {
            action: ga.resolve(input.page),
            selector: ga.selector.clone(),
        })
    }
}
