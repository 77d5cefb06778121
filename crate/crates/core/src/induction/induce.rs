use std::collections::BTreeSet;

use super::abstraction::{descriptor_for, generalize_url, intent_of, TemplateBuilder};
use super::attribution::infer_reasoning_mode;
use super::templates::{corrective_principle, mode_description, verification};
use crate::error::{Error, Result};
use crate::runtime::{alternate_selectors, ActionRecord, Trajectory};
use crate::sim::env::notes;
use crate::sim::ActionKind;
use crate::skill::{
    Intent, InteractionOrigin, InteractionSkill, Level, OperationTemplate, ReasoningOrigin, ReasoningSkill,
    SkillEntry, SkillIdAllocator,
};
use crate::taxonomy::{ErrorLevel, FailureClass};

fn effective(a: &ActionRecord) -> bool {
    intent_of(a.action.kind).is_some()
        && a.result != notes::NO_EFFECT
        && a.result != notes::BLOCKED
        && a.result != notes::NOT_FOUND
}

fn dismisses_modal(a: &ActionRecord) -> bool {
    a.modal_open
        && a.action.kind == ActionKind::Click
        && a.element
            .as_ref()
            .is_some_and(|el| alternate_selectors(el).iter().any(|s| a.dismiss_chain.contains(s)))
}

/// G_succ: one template per effective primitive action, entities lifted into
/// parameters, descriptor from the start url and instruction keywords.
pub fn induce_from_success(t: &Trajectory, ids: &mut SkillIdAllocator) -> Result<InteractionSkill> {
    if !t.success {
        return Err(Error::Precondition(format!("trajectory {} did not succeed", t.task_id)));
    }
    let actions: Vec<&ActionRecord> = t.actions().filter(|a| effective(a)).collect();
    if actions.is_empty() {
        return Err(Error::Precondition(format!("trajectory {} has no actions to abstract", t.task_id)));
    }
    let mut builder = TemplateBuilder::new(&t.instruction);
    let templates: Vec<OperationTemplate> = actions
        .iter()
        .map(|a| {
            let t = builder.template(a, intent_of(a.action.kind).expect("filtered"), false);
            // the banner may already be gone when the skill is reused
            if dismisses_modal(a) {
                t.optional()
            } else {
                t
            }
        })
        .collect();
    let start = generalize_url(&t.start_url, &builder.entity_tokens);
    let descriptor = descriptor_for(&t.site_id, vec![start], &t.instruction, &t.task_type);
    Ok(InteractionSkill {
        skill_id: ids.next(Level::Interaction),
        descriptor,
        parameters: builder.into_parameters(),
        templates,
        final_check: None,
        consecutive_patch_failures: 0,
        origin: InteractionOrigin::SuccessInduced,
    })
}

/// The actions the agent meant to take: goto excluded, (intent, element)
/// deduplicated, cut at the first return to an already visited page.
fn intended_sequence(t: &Trajectory) -> Vec<(&ActionRecord, Intent)> {
    let mut visited: BTreeSet<&str> = BTreeSet::new();
    visited.insert(t.start_url.as_str());
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for a in t.actions() {
        if a.url_after != a.url_before && visited.contains(a.url_after.as_str()) {
            break;
        }
        visited.insert(a.url_after.as_str());
        let Some(mut intent) = intent_of(a.action.kind) else { continue };
        if intent == Intent::Goto {
            continue;
        }
        if intent == Intent::Type && a.element.as_ref().is_some_and(|e| e.tag == "select") {
            intent = Intent::Select;
        }
        let key = a.action.target.as_ref().map(|k| k.as_str().to_string()).unwrap_or_default();
        if seen.insert((intent, key)) {
            out.push((a, intent));
        }
    }
    out
}

fn reasoning_from_failure(t: &Trajectory, class: &FailureClass, ids: &mut SkillIdAllocator) -> ReasoningSkill {
    let mode = class
        .mode
        .filter(|m| m.level() == ErrorLevel::ErrReasoning)
        .unwrap_or_else(|| infer_reasoning_mode(t));
    let tokens = super::abstraction::entity_tokens(&t.instruction);
    let mut patterns: Vec<String> = Vec::new();
    for u in &t.visited {
        let g = generalize_url(u, &tokens);
        if !patterns.contains(&g) {
            patterns.push(g);
        }
    }
    let last = t.visited.last().map(|u| generalize_url(u, &tokens)).unwrap_or_default();
    let summary = format!("It happened on {last} after {} action(s).", t.action_count());
    ReasoningSkill {
        skill_id: ids.next(Level::Reasoning),
        mistake: format!("{} {summary}", mode_description(mode)),
        guidance: corrective_principle(mode).to_string(),
        verification: verification(mode).to_string(),
        descriptor: descriptor_for(&t.site_id, patterns, &t.instruction, &t.task_type),
        usage_count: 0,
        success_count: 0,
        origin: ReasoningOrigin::FailureInduced,
        mode: Some(mode),
    }
}

fn interaction_from_failure(t: &Trajectory, ids: &mut SkillIdAllocator) -> Option<InteractionSkill> {
    let sequence = intended_sequence(t);
    if sequence.is_empty() {
        log::info!("no intended actions in {}; no interaction skill induced", t.task_id);
        return None;
    }
    let mut builder = TemplateBuilder::new(&t.instruction);
    let mut templates = Vec::new();
    let mut dismiss_added = false;
    for (a, intent) in sequence {
        if !dismiss_added && a.result == notes::BLOCKED && !a.dismiss_chain.is_empty() {
            templates.push(OperationTemplate::new(Intent::Click, a.dismiss_chain.clone()).optional());
            dismiss_added = true;
        }
        templates.push(builder.template(a, intent, true));
    }
    let start = generalize_url(&t.start_url, &builder.entity_tokens);
    let descriptor = descriptor_for(&t.site_id, vec![start], &t.instruction, &t.task_type);
    Some(InteractionSkill {
        skill_id: ids.next(Level::Interaction),
        descriptor,
        parameters: builder.into_parameters(),
        templates,
        final_check: None,
        consecutive_patch_failures: 0,
        origin: InteractionOrigin::FailureInduced,
    })
}

/// G_fail: a reasoning skill for err_reasoning, a rebuilt interaction skill
/// for err_interaction. None when the trace holds no actionable step.
pub fn induce_from_failure(t: &Trajectory, class: &FailureClass, ids: &mut SkillIdAllocator) -> Option<SkillEntry> {
    match class.value {
        ErrorLevel::ErrReasoning => Some(SkillEntry::Reasoning(reasoning_from_failure(t, class, ids))),
        ErrorLevel::ErrInteraction => interaction_from_failure(t, ids).map(SkillEntry::Interaction),
    }
}
