use std::collections::BTreeSet;

use super::model::{
    is_well_formed_id, EffectCheck, InteractionSkill, Level, ReasoningSkill, ScenarioDescriptor, SkillEntry,
    SkillLibrary,
};
use crate::selector::parse_selector;
use crate::sim::env::is_registered_cue;
use crate::sim::site::glob_match;
use crate::taxonomy::ErrorLevel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn has(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

fn check_descriptor(d: &ScenarioDescriptor, path: &str, report: &mut ValidationReport) {
    if d.url_patterns.is_empty() {
        report.push(format!("{path}.url_patterns"), "no url patterns");
    }
    for (i, p) in d.url_patterns.iter().enumerate() {
        if glob::Pattern::new(p).is_err() {
            report.push(format!("{path}.url_patterns[{i}]"), format!("invalid glob {p:?}"));
        }
    }
    if d.keywords.is_empty() {
        report.push(format!("{path}.keywords"), "no keywords");
    }
    for (i, k) in d.keywords.iter().enumerate() {
        if k.is_empty() || k.chars().any(char::is_uppercase) {
            report.push(format!("{path}.keywords[{i}]"), format!("keyword {k:?} is not lowercase"));
        }
    }
    for (i, c) in d.context_cues.iter().enumerate() {
        if !is_registered_cue(c) {
            report.push(format!("{path}.context_cues[{i}]"), format!("unregistered cue {c:?}"));
        }
    }
}

fn check_reasoning(s: &ReasoningSkill, report: &mut ValidationReport) {
    if !is_well_formed_id(&s.skill_id, Level::Reasoning) {
        report.push("skill_id", format!("malformed reasoning skill id {:?}", s.skill_id));
    }
    for (field, text) in [("mistake", &s.mistake), ("guidance", &s.guidance), ("verification", &s.verification)] {
        if text.trim().is_empty() {
            report.push(field, "empty text");
        }
    }
    if s.success_count > s.usage_count {
        report.push(
            "success_count",
            format!("success count {} exceeds usage count {} (S ≤ N)", s.success_count, s.usage_count),
        );
    }
    if let Some(m) = s.mode {
        if m.level() != ErrorLevel::ErrReasoning {
            report.push("mode", format!("{m} is not a reasoning failure mode"));
        }
    }
    check_descriptor(&s.descriptor, "descriptor", report);
}

fn check_selector(source: &str, params: &BTreeSet<&str>, path: String, report: &mut ValidationReport) {
    match parse_selector(source) {
        Ok(sel) => {
            for name in sel.placeholders() {
                if !params.contains(name.as_str()) {
                    report.push(path.clone(), format!("selector references unknown parameter {name:?}"));
                }
            }
        }
        Err(e) => report.push(path, format!("unparseable selector {source:?}: {e}")),
    }
}

fn check_interaction(s: &InteractionSkill, report: &mut ValidationReport) {
    if !is_well_formed_id(&s.skill_id, Level::Interaction) {
        report.push("skill_id", format!("malformed interaction skill id {:?}", s.skill_id));
    }
    check_descriptor(&s.descriptor, "descriptor", report);
    let mut params = BTreeSet::new();
    for (i, p) in s.parameters.iter().enumerate() {
        if p.name.is_empty() || !params.insert(p.name.as_str()) {
            report.push(format!("parameters[{i}]"), format!("empty or duplicate parameter name {:?}", p.name));
        }
    }
    if s.templates.is_empty() {
        report.push("templates", "no operation templates");
    }
    for (j, t) in s.templates.iter().enumerate() {
        let path = format!("templates[{j}]");
        if t.intent.needs_selector() && t.selector_chain.is_empty() {
            report.push(format!("{path}.selector_chain"), "empty selector chain");
        }
        for (l, src) in t.selector_chain.iter().enumerate() {
            check_selector(src, &params, format!("{path}.selector_chain[{l}]"), report);
        }
        if let Some(slot) = &t.argument_slot {
            if !params.contains(slot.as_str()) {
                report.push(format!("{path}.argument_slot"), format!("slot {slot:?} is not a declared parameter"));
            }
        } else if t.intent.needs_payload() && t.payload.is_none() {
            report.push(format!("{path}.payload"), format!("{:?} needs an argument slot or payload", t.intent));
        }
        if let EffectCheck::ElementAppears(sel) = &t.expected_effect {
            check_selector(sel, &params, format!("{path}.expected_effect"), report);
        }
        if let EffectCheck::UrlChangesTo(g) = &t.expected_effect {
            if glob::Pattern::new(g).is_err() {
                report.push(format!("{path}.expected_effect"), format!("invalid glob {g:?}"));
            }
        }
    }
    if let Some(EffectCheck::ElementAppears(sel)) = &s.final_check {
        check_selector(sel, &params, "final_check".into(), report);
    }
}

/// Every invariant violation of a skill entry, by field path.
pub fn validate_entry(entry: &SkillEntry) -> ValidationReport {
    let mut report = ValidationReport::default();
    match entry {
        SkillEntry::Reasoning(s) => check_reasoning(s, &mut report),
        SkillEntry::Interaction(s) => check_interaction(s, &mut report),
    }
    report
}

pub fn validate_library(lib: &SkillLibrary) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut ids = BTreeSet::new();
    for id in lib.skill_ids() {
        if !ids.insert(id) {
            report.push(format!("skill {id}"), "duplicate skill id");
        }
    }
    for s in &lib.reasoning {
        let sub = validate_entry(&SkillEntry::Reasoning(s.clone()));
        report.violations.extend(sub.violations.into_iter().map(|v| Violation {
            path: format!("reasoning[{}].{}", s.skill_id, v.path),
            message: v.message,
        }));
    }
    for s in &lib.interaction {
        let sub = validate_entry(&SkillEntry::Interaction(s.clone()));
        report.violations.extend(sub.violations.into_iter().map(|v| Violation {
            path: format!("interaction[{}].{}", s.skill_id, v.path),
            message: v.message,
        }));
    }
    report
}

/// Whether a descriptor's url patterns admit `url`.
pub fn descriptor_matches_url(d: &ScenarioDescriptor, url: &str) -> bool {
    d.url_patterns.iter().any(|p| glob_match(p, url))
}
