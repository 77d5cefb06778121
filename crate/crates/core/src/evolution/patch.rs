//! Patch^i and Prune^i: selector-level repair of interaction skills from
//! their feedback, and removal of skills that keep failing after patches.

use std::collections::{BTreeMap, BTreeSet};

use super::feedback::{classify_local_failure, FeedbackRecord, LocalFailure};
use crate::error::{Error, Result};
use crate::induction::abstraction::intent_of;
use crate::runtime::{alternate_selectors, ActionRecord};
use crate::selector::Selector;
use crate::sim::env::notes;
use crate::sim::ElementSnapshot;
use crate::skill::{Intent, InteractionOrigin, InteractionSkill, OperationTemplate};

/// Failures in this many distinct records remove a selector; fewer demote it.
pub const REMOVAL_RECORDS: usize = 2;

fn action_intent(a: &ActionRecord) -> Option<Intent> {
    let intent = intent_of(a.action.kind)?;
    if intent == Intent::Type && a.element.as_ref().is_some_and(|e| e.tag == "select") {
        return Some(Intent::Select);
    }
    Some(intent)
}

fn worked(a: &ActionRecord) -> bool {
    a.element.is_some() && ![notes::NO_EFFECT, notes::BLOCKED, notes::NOT_FOUND].contains(&a.result.as_str())
}

/// Locators for an element, with instance text bound back to the argument it
/// came from.
fn hint_selectors(el: &ElementSnapshot, args: &BTreeMap<String, String>) -> Vec<String> {
    let bound = |value: &str| args.iter().find(|(_, v)| v.trim().eq_ignore_ascii_case(value.trim())).map(|(k, _)| k);
    let mut out = Vec::new();
    if let Some(name) = el.text.as_deref().and_then(bound) {
        out.push(Selector::ByText(format!("{{{name}}}")).to_string());
        if let Some(l) = el.label.as_deref().filter(|l| !l.trim().is_empty()) {
            out.push(Selector::ByLabel(l.trim().to_string()).to_string());
        }
        return out;
    }
    alternate_selectors(el)
}

/// Greedy alignment of the episode's later primitive actions to templates
/// `from..`, by intent.
fn align_followup(skill: &InteractionSkill, from: usize, record: &FeedbackRecord, hints: &mut [Vec<String>]) {
    let mut pos = 0;
    for (j, t) in skill.templates.iter().enumerate().skip(from) {
        if matches!(t.intent, Intent::Goto | Intent::Read) || t.optional {
            continue;
        }
        let found = record.followup[pos..]
            .iter()
            .position(|a| worked(a) && action_intent(a) == Some(t.intent));
        let Some(p) = found else { continue };
        let a = &record.followup[pos + p];
        pos += p + 1;
        for s in hint_selectors(a.element.as_ref().expect("worked"), &record.args) {
            if !hints[j].contains(&s) {
                hints[j].push(s);
            }
        }
    }
}

fn rebuild_chain(chain: &[String], failures: &BTreeMap<String, BTreeSet<usize>>, hints: &[String]) -> Vec<String> {
    let count = |s: &String| failures.get(s).map_or(0, BTreeSet::len);
    let mut out: Vec<String> = chain.iter().filter(|s| count(s) == 0).cloned().collect();
    for h in hints {
        if !chain.contains(h) && !out.contains(h) {
            out.push(h.clone());
        }
    }
    out.extend(chain.iter().filter(|s| (1..REMOVAL_RECORDS).contains(&count(s))).cloned());
    if out.is_empty() {
        // the last surviving selector is demoted, never removed
        if let Some(first) = chain.first() {
            out.push(first.clone());
        }
    }
    out
}

/// Patch^i(k, Φ_k). Failed selectors move behind the ones that have not
/// failed and are dropped after failing in two records; selectors that
/// located the same element in later successful steps are appended; a modal
/// seen on a no-state-change or no-result failure gets an optional dismiss
/// template before the blocked step.
pub fn patch_interaction(skill: &InteractionSkill, records: &[&FeedbackRecord]) -> Result<InteractionSkill> {
    if records.is_empty() {
        return Err(Error::Precondition(format!("no feedback for {}", skill.skill_id)));
    }
    let n = skill.templates.len();
    let mut failures: Vec<BTreeMap<String, BTreeSet<usize>>> = vec![BTreeMap::new(); n];
    let mut hints: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut dismiss: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let (mut any_failure, mut any_success) = (false, false);

    for (ri, r) in records.iter().enumerate() {
        if r.skill_id != skill.skill_id {
            return Err(Error::Precondition(format!("record for {} given to {}", r.skill_id, skill.skill_id)));
        }
        let case = classify_local_failure(r)?;
        let log = r.log.as_ref().ok_or_else(|| Error::Precondition("interaction record without a log".into()))?;
        match case {
            None => any_success = true,
            Some(_) => any_failure = true,
        }
        for (pos, tr) in log.records.iter().enumerate() {
            let Some(t) = skill.templates.get(tr.template_index) else { continue };
            let misses = match tr.chain_index {
                Some(k) => k,
                None if !tr.skipped && case == Some(LocalFailure::NoSelectorMatch) && pos + 1 == log.records.len() => {
                    t.selector_chain.len()
                }
                None => 0,
            };
            for s in t.selector_chain.iter().take(misses) {
                failures[tr.template_index].entry(s.clone()).or_default().insert(ri);
            }
        }
        let failed_at = log.records.last().map(|tr| tr.template_index);
        match (case, failed_at) {
            (Some(LocalFailure::NoSelectorMatch | LocalFailure::NoStateChange), Some(j)) if r.task_label => {
                align_followup(skill, j, r, &mut hints);
            }
            _ => {}
        }
        if matches!(case, Some(LocalFailure::NoStateChange | LocalFailure::NoResult)) {
            if let Some(m) = &log.modal {
                dismiss.entry(m.at_template).or_insert_with(|| m.dismiss_chain.clone());
            }
        }
    }

    let mut patched = skill.clone();
    for (j, t) in patched.templates.iter_mut().enumerate() {
        if t.intent.needs_selector() {
            t.selector_chain = rebuild_chain(&t.selector_chain, &failures[j], &hints[j]);
        }
    }
    for (at, chain) in dismiss.into_iter().rev() {
        let already = at > 0 && {
            let prev = &patched.templates[at - 1];
            prev.optional && prev.intent == Intent::Click && prev.selector_chain.first() == chain.first()
        };
        if !already && !chain.is_empty() && at <= patched.templates.len() {
            patched.templates.insert(at, OperationTemplate::new(Intent::Click, chain).optional());
        }
    }
    patched.consecutive_patch_failures = if any_success || !any_failure {
        0
    } else {
        skill.consecutive_patch_failures + 1
    };
    if patched.templates != skill.templates {
        patched.origin = InteractionOrigin::Patched;
    }
    Ok(patched)
}

/// Prune^i: drops skills whose failure this round brought them to `max_failures`
/// consecutive patched failures. Skills without feedback are untouched.
pub fn prune_interaction(
    skills: Vec<InteractionSkill>,
    feedback: &[&FeedbackRecord],
    max_failures: u32,
) -> Vec<InteractionSkill> {
    let touched: BTreeSet<&str> = feedback.iter().map(|r| r.skill_id.as_str()).collect();
    skills
        .into_iter()
        .filter(|s| {
            let drop = touched.contains(s.skill_id.as_str()) && s.consecutive_patch_failures >= max_failures;
            if drop {
                log::info!("pruning {} after {} failed rounds", s.skill_id, s.consecutive_patch_failures);
            }
            !drop
        })
        .collect()
}
