//! Closed-loop execution of interaction skills against a live environment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::trajectory::{perform, ActionRecord};
use crate::error::Result;
use crate::selector::{fill_placeholders, parse_chain, parse_selector, resolve_parsed, Selector};
use crate::sim::env::notes;
use crate::sim::site::glob_match;
use crate::sim::{Action, ElementSnapshot, Observation, WebEnv};
use crate::skill::{EffectCheck, Intent, InteractionSkill, OperationTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeStatus {
    Success,
    NoSelectorMatch,
    NoStateChange,
    NoResult,
    CheckViolation,
    ArgumentFailure,
}

impl OutcomeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeStatus::Success => "success",
            OutcomeStatus::NoSelectorMatch => "no-selector-match",
            OutcomeStatus::NoStateChange => "no-state-change",
            OutcomeStatus::NoResult => "no-result",
            OutcomeStatus::CheckViolation => "check-violation",
            OutcomeStatus::ArgumentFailure => "argument-failure",
        }
    }
}

impl std::fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: OutcomeStatus,
    pub detail: String,
}

impl ExecutionOutcome {
    fn new(status: OutcomeStatus, detail: impl Into<String>) -> Self {
        Self { status, detail: detail.into() }
    }

    pub fn is_success(&self) -> bool {
        self.status == OutcomeStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub template_index: usize,
    /// Position in the selector chain that resolved; none if nothing did.
    pub chain_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    /// Environment note for the action, when one was taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    /// Whether the expected effect held after the action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_held: Option<bool>,
    #[serde(default)]
    pub skipped: bool,
}

/// A modal that was open when a template failed, with selectors for its
/// dismiss control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalInfo {
    pub at_template: usize,
    pub dismiss_chain: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub records: Vec<TemplateRecord>,
    pub url_before: String,
    pub url_after: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modal: Option<ModalInfo>,
}

/// k^i(C, X): realized actions α, local outcome e and log Δ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub actions: Vec<ActionRecord>,
    pub outcome: ExecutionOutcome,
    pub log: ExecutionLog,
}

/// Alternate locators for an element, in priority order id > text > label.
pub fn alternate_selectors(el: &ElementSnapshot) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(id) = &el.id {
        out.push(Selector::ById(id.clone()).to_string());
    }
    if let Some(t) = el.text.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
        out.push(Selector::ByText(t.to_string()).to_string());
    }
    if let Some(l) = el.label.as_deref().map(str::trim).filter(|l| !l.is_empty()) {
        out.push(Selector::ByLabel(l.to_string()).to_string());
    }
    out
}

/// Selectors for the first clickable control inside an open modal.
pub fn modal_dismiss_chain(obs: &Observation) -> Option<Vec<String>> {
    if !obs.modal_open {
        return None;
    }
    obs.page_snapshot
        .iter()
        .find(|e| e.in_modal && e.interactive && matches!(e.tag.as_str(), "button" | "a"))
        .map(alternate_selectors)
        .filter(|c| !c.is_empty())
}

#[derive(Debug, Clone, PartialEq)]
enum Item {
    Word(String),
    Quoted(String),
    Number(String),
}

fn scan(instruction: &str) -> Vec<Item> {
    let chars: Vec<char> = instruction.chars().collect();
    let mut items = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' || c == '\u{201c}' {
            let close = if c == '"' { '"' } else { '\u{201d}' };
            let end = chars[i + 1..].iter().position(|&d| d == close).map(|p| i + 1 + p);
            if let Some(end) = end {
                items.push(Item::Quoted(chars[i + 1..end].iter().collect()));
                i = end + 1;
                continue;
            }
        }
        if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || (chars[i] == '.' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit() && chars[start].is_ascii_digit())) {
                i += 1;
            }
            let token: String = chars[start..i].iter().collect();
            if token.chars().all(|c| c.is_ascii_digit() || c == '.') {
                items.push(Item::Number(token));
            } else {
                items.push(Item::Word(token.to_lowercase()));
            }
            continue;
        }
        i += 1;
    }
    items
}

const TAG_FILLERS: &[&str] = &["is", "of", "as", "named", "called", "to", "equal", "equals"];

fn names_param(word: &str, name: &str) -> bool {
    let name = name.to_lowercase();
    word == name || word.strip_suffix('s') == Some(name.as_str())
}

/// X_t: fills every parameter slot from the instruction (keyword-tagged spans,
/// then quoted spans and numbers in order) and finally from current form values.
pub fn instantiate_args(
    skill: &InteractionSkill,
    instruction: &str,
    obs: &Observation,
) -> std::result::Result<BTreeMap<String, String>, String> {
    let items = scan(instruction);
    let mut used = BTreeSet::new();
    let mut args = BTreeMap::new();

    for p in &skill.parameters {
        'outer: for (i, item) in items.iter().enumerate() {
            let Item::Word(w) = item else { continue };
            if !names_param(w, &p.name) {
                continue;
            }
            for (k, next) in items.iter().enumerate().skip(i + 1) {
                match next {
                    Item::Word(f) if TAG_FILLERS.contains(&f.as_str()) => continue,
                    Item::Number(n) if !used.contains(&k) => {
                        used.insert(k);
                        args.insert(p.name.clone(), n.clone());
                        break 'outer;
                    }
                    Item::Quoted(q) if !p.is_numeric() && !used.contains(&k) => {
                        used.insert(k);
                        args.insert(p.name.clone(), q.clone());
                        break 'outer;
                    }
                    _ => break,
                }
            }
        }
    }

    for p in &skill.parameters {
        if args.contains_key(&p.name) {
            continue;
        }
        let pick = items.iter().enumerate().find(|(k, item)| {
            !used.contains(k)
                && match item {
                    Item::Number(_) => p.is_numeric(),
                    Item::Quoted(_) => !p.is_numeric(),
                    Item::Word(_) => false,
                }
        });
        if let Some((k, Item::Number(v) | Item::Quoted(v))) = pick {
            used.insert(k);
            args.insert(p.name.clone(), v.clone());
        }
    }

    for p in &skill.parameters {
        if args.contains_key(&p.name) {
            continue;
        }
        if let Some(v) = obs.state_view.get(&p.name).filter(|v| !v.trim().is_empty()) {
            args.insert(p.name.clone(), v.clone());
        }
    }

    let missing: Vec<&str> = skill
        .parameters
        .iter()
        .filter(|p| !args.contains_key(&p.name))
        .map(|p| p.name.as_str())
        .collect();
    if missing.is_empty() {
        Ok(args)
    } else {
        Err(format!("unfillable parameter(s): {}", missing.join(", ")))
    }
}

fn effect_holds(check: &EffectCheck, env: &WebEnv, url_before: &str, args: &BTreeMap<String, String>) -> Result<bool> {
    let obs = env.observe()?;
    Ok(match check {
        EffectCheck::None => true,
        EffectCheck::ValueSet => obs.last_action_result.as_deref() == Some(notes::VALUE_SET),
        EffectCheck::UrlChangesTo(g) => obs.url != url_before && glob_match(g, &obs.url),
        EffectCheck::ElementAppears(src) => match parse_selector(src) {
            Ok(sel) => resolve_parsed(&[sel.substitute(args)], &env.current_page()?).is_some(),
            Err(_) => false,
        },
    })
}

fn failure_status(check: &EffectCheck) -> OutcomeStatus {
    match check {
        EffectCheck::ElementAppears(_) => OutcomeStatus::NoResult,
        _ => OutcomeStatus::NoStateChange,
    }
}

fn template_payload(t: &OperationTemplate, args: &BTreeMap<String, String>) -> Option<String> {
    match &t.argument_slot {
        Some(slot) => args.get(slot).cloned(),
        None => t.payload.as_ref().map(|p| fill_placeholders(p, args)),
    }
}

/// Runs the templates in order, re-resolving each selector chain on the live
/// page, and stops at the first failing template. At most `budget` primitive
/// actions are issued.
pub fn invoke_interaction(
    skill: &InteractionSkill,
    env: &mut WebEnv,
    args: &BTreeMap<String, String>,
    budget: usize,
) -> Result<Invocation> {
    let start = env.observe()?;
    let mut log = ExecutionLog {
        url_before: start.url.clone(),
        ..ExecutionLog::default()
    };
    let mut actions = Vec::new();
    let outcome = 'run: {
        for (j, t) in skill.templates.iter().enumerate() {
            let obs = env.observe()?;
            let page = env.current_page()?;
            let mut rec = TemplateRecord {
                template_index: j,
                chain_index: None,
                action: None,
                result: None,
                effect_held: None,
                skipped: false,
            };
            let fail = |log: &mut ExecutionLog, rec: TemplateRecord, status, detail: String| {
                if log.modal.is_none() {
                    if let Some(chain) = modal_dismiss_chain(&obs) {
                        log.modal = Some(ModalInfo { at_template: j, dismiss_chain: chain });
                    }
                }
                log.records.push(rec);
                ExecutionOutcome::new(status, detail)
            };

            let chain = match parse_chain(&t.selector_chain) {
                Ok(c) => c.into_iter().map(|s| s.substitute(args)).collect::<Vec<_>>(),
                Err(e) => {
                    break 'run fail(&mut log, rec, OutcomeStatus::NoSelectorMatch, format!("template {j}: {e}"));
                }
            };
            let payload = template_payload(t, args);
            let action = if t.intent == Intent::Goto {
                Action::goto(payload.unwrap_or_default())
            } else {
                let Some(resolved) = resolve_parsed(&chain, &page) else {
                    if t.optional {
                        rec.skipped = true;
                        log.records.push(rec);
                        continue;
                    }
                    let detail = format!("template {j}: none of {} selector(s) matched", chain.len());
                    break 'run fail(&mut log, rec, OutcomeStatus::NoSelectorMatch, detail);
                };
                rec.chain_index = Some(resolved.index);
                match t.intent {
                    Intent::Click => Action::click(resolved.element),
                    Intent::Submit => Action::submit(resolved.element),
                    Intent::Type => Action::type_text(resolved.element, payload.unwrap_or_default()),
                    Intent::Select => Action::select(resolved.element, payload.unwrap_or_default()),
                    Intent::Read => {
                        log.records.push(rec);
                        continue;
                    }
                    Intent::Goto => unreachable!(),
                }
            };
            if actions.len() >= budget {
                log.notes.push("step budget exhausted".into());
                break 'run fail(&mut log, rec, OutcomeStatus::NoResult, format!("template {j}: step budget exhausted"));
            }
            rec.action = Some(action.clone());
            let (record, after) = perform(env, &action, None)?;
            actions.push(record);
            let note = after.last_action_result.clone().unwrap_or_default();
            rec.result = Some(note.clone());
            if note == notes::NO_EFFECT || note == notes::BLOCKED || note == notes::NOT_FOUND {
                rec.effect_held = Some(false);
                if t.optional {
                    log.records.push(rec);
                    continue;
                }
                log.notes.push(format!("template {j}: {note}"));
                break 'run fail(&mut log, rec, OutcomeStatus::NoStateChange, format!("template {j}: {note}"));
            }
            let held = effect_holds(&t.expected_effect, env, &obs.url, args)?;
            rec.effect_held = Some(held);
            if !held && !t.optional {
                let detail = format!("template {j}: expected {} did not hold", t.expected_effect);
                break 'run fail(&mut log, rec, failure_status(&t.expected_effect), detail);
            }
            log.records.push(rec);
        }
        if let Some(check) = &skill.final_check {
            if !effect_holds(check, env, &start.url, args)? {
                break 'run ExecutionOutcome::new(OutcomeStatus::CheckViolation, format!("final check {check} failed"));
            }
        }
        ExecutionOutcome::new(OutcomeStatus::Success, format!("{} template(s) executed", skill.templates.len()))
    };
    log.url_after = env.observe()?.url;
    Ok(Invocation { actions, outcome, log })
}
