//! Entity abstraction shared by success- and failure-driven induction.

use std::collections::{BTreeMap, BTreeSet};

use crate::runtime::{alternate_selectors, ActionRecord};
use crate::selector::Selector;
use crate::sim::env::{notes, site_cue};
use crate::sim::ActionKind;
use crate::skill::{derive_keywords, tokenize, EffectCheck, Intent, OperationTemplate, Parameter, ScenarioDescriptor};

/// Quoted spans and standalone numbers, in order of appearance.
pub fn instruction_entities(instruction: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut in_quote = false;
    let mut current = String::new();
    let mut word = String::new();
    let flush_word = |word: &mut String, out: &mut Vec<String>| {
        if !word.is_empty() && word.chars().all(|c| c.is_ascii_digit()) {
            out.push(word.clone());
        }
        word.clear();
    };
    for c in instruction.chars() {
        if in_quote {
            if c == '"' || c == '\u{201d}' {
                out.push(std::mem::take(&mut current));
                in_quote = false;
            } else {
                current.push(c);
            }
        } else if c == '"' || c == '\u{201c}' {
            flush_word(&mut word, &mut out);
            in_quote = true;
        } else if c.is_alphanumeric() {
            word.push(c);
        } else {
            flush_word(&mut word, &mut out);
        }
    }
    flush_word(&mut word, &mut out);
    out.retain(|e| !e.trim().is_empty());
    out
}

pub fn entity_tokens(instruction: &str) -> BTreeSet<String> {
    instruction_entities(instruction).iter().flat_map(|e| tokenize(e)).collect()
}

/// The instruction with entity spans removed.
pub fn stripped_instruction(instruction: &str) -> String {
    let entities = instruction_entities(instruction);
    let mut s = instruction.to_string();
    for e in &entities {
        s = s.replace(&format!("\"{e}\""), " ");
    }
    tokenize(&s)
        .into_iter()
        .filter(|t| !t.chars().all(|c| c.is_ascii_digit()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Url pattern for a family of pages: digit segments and segments naming an
/// instruction entity become `*`, a query string becomes `?*`.
pub fn generalize_url(url: &str, entities: &BTreeSet<String>) -> String {
    let (path, query) = match url.split_once('?') {
        Some((p, _)) => (p, true),
        None => (url, false),
    };
    let segments: Vec<String> = path
        .split('/')
        .map(|seg| {
            let lower = seg.to_lowercase();
            let numeric = !seg.is_empty() && seg.chars().all(|c| c.is_ascii_digit());
            let named = tokenize(&lower).iter().any(|t| t.len() >= 3 && entities.contains(t));
            if numeric || named {
                "*".to_string()
            } else {
                seg.to_string()
            }
        })
        .collect();
    let mut out = segments.join("/");
    if query {
        out.push_str("?*");
    }
    out
}

pub fn descriptor_for(site_id: &str, url_patterns: Vec<String>, instruction: &str, task_type: &str) -> ScenarioDescriptor {
    let semantics = stripped_instruction(instruction);
    let mut d = ScenarioDescriptor::new(url_patterns, vec![site_cue(site_id)], semantics);
    if d.keywords.is_empty() {
        d.keywords = derive_keywords(&task_type.replace(['-', '_'], " "));
    }
    d
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

/// Turns recorded actions into templates, lifting instruction entities into
/// parameters.
pub struct TemplateBuilder {
    entities: Vec<String>,
    params: Vec<(usize, Parameter)>,
    by_entity: BTreeMap<usize, String>,
    pub entity_tokens: BTreeSet<String>,
}

impl TemplateBuilder {
    pub fn new(instruction: &str) -> Self {
        Self {
            entities: instruction_entities(instruction),
            params: Vec::new(),
            by_entity: BTreeMap::new(),
            entity_tokens: entity_tokens(instruction),
        }
    }

    fn entity_index(&self, value: &str) -> Option<usize> {
        let v = value.trim();
        self.entities.iter().position(|e| e.trim().eq_ignore_ascii_case(v))
    }

    /// Parameter for an entity-valued payload or text, created on first use.
    fn param_for(&mut self, value: &str, rec: &ActionRecord) -> Option<String> {
        let idx = self.entity_index(value)?;
        if let Some(name) = self.by_entity.get(&idx) {
            return Some(name.clone());
        }
        let el = rec.element.as_ref();
        let taken: BTreeSet<&str> = self.params.iter().map(|(_, p)| p.name.as_str()).collect();
        let candidates = [
            el.and_then(|e| e.attrs.get("name")).map(|n| sanitize(n)),
            el.and_then(|e| e.id.as_deref()).map(sanitize),
        ];
        let name = candidates
            .into_iter()
            .flatten()
            .find(|n| !n.is_empty() && !taken.contains(n.as_str()))
            .unwrap_or_else(|| format!("arg{}", self.params.len() + 1));
        let description = format!("value taken from the instruction, e.g. {value:?}");
        self.params.push((idx, Parameter::new(name.clone(), description, self.entities[idx].clone())));
        self.by_entity.insert(idx, name.clone());
        Some(name)
    }

    fn chain(&mut self, rec: &ActionRecord, widen: bool) -> Vec<String> {
        let mut chain: Vec<String> = Vec::new();
        let push = |s: String, chain: &mut Vec<String>| {
            if !chain.contains(&s) {
                chain.push(s);
            }
        };
        let Some(el) = rec.element.clone() else {
            if let Some(s) = &rec.selector {
                push(s.clone(), &mut chain);
            }
            return chain;
        };
        let entity_text = el.text.as_deref().and_then(|t| self.param_for(t, rec));
        if let Some(p) = entity_text {
            // the id of an entity-bearing element names one instance; locate by text instead
            push(Selector::ByText(format!("{{{p}}}")).to_string(), &mut chain);
            if let Some(l) = el.label.as_deref().filter(|l| !l.trim().is_empty()) {
                push(Selector::ByLabel(l.trim().to_string()).to_string(), &mut chain);
            }
        } else {
            if let Some(s) = &rec.selector {
                push(s.clone(), &mut chain);
            }
            for s in alternate_selectors(&el) {
                push(s, &mut chain);
            }
        }
        if widen {
            if let Some(n) = el.attrs.get("name") {
                push(Selector::ByAttr("name".into(), n.clone()).to_string(), &mut chain);
            }
        }
        chain
    }

    pub fn template(&mut self, rec: &ActionRecord, intent: Intent, widen: bool) -> OperationTemplate {
        let chain = if intent == Intent::Goto { Vec::new() } else { self.chain(rec, widen) };
        let mut t = OperationTemplate::new(intent, chain);
        if let Some(payload) = &rec.action.payload {
            match self.param_for(payload, rec) {
                Some(p) if intent != Intent::Goto => t = t.with_slot(p),
                _ => t = t.with_payload(payload.clone()),
            }
        }
        t.expected_effect = self.effect_of(rec, intent);
        t
    }

    fn effect_of(&self, rec: &ActionRecord, intent: Intent) -> EffectCheck {
        if rec.result == notes::NAVIGATED && rec.url_after != rec.url_before {
            return EffectCheck::UrlChangesTo(generalize_url(&rec.url_after, &self.entity_tokens));
        }
        if matches!(intent, Intent::Type | Intent::Select) && rec.result == notes::VALUE_SET {
            return EffectCheck::ValueSet;
        }
        EffectCheck::None
    }

    /// Parameters ordered by first appearance in the instruction.
    pub fn into_parameters(mut self) -> Vec<Parameter> {
        self.params.sort_by_key(|(i, _)| *i);
        self.params.into_iter().map(|(_, p)| p).collect()
    }
}

pub fn intent_of(kind: ActionKind) -> Option<Intent> {
    Some(match kind {
        ActionKind::Click => Intent::Click,
        ActionKind::Type => Intent::Type,
        ActionKind::Select => Intent::Select,
        ActionKind::Submit => Intent::Submit,
        ActionKind::Goto => Intent::Goto,
        ActionKind::Answer | ActionKind::Stop => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entities_in_order() {
        assert_eq!(instruction_entities("Assign issue 12 to \"alice\""), ["12", "alice"]);
        assert_eq!(instruction_entities("Search for \"blue mug\" now"), ["blue mug"]);
        assert!(instruction_entities("no entities here").is_empty());
    }

    #[test]
    fn stripping_and_generalizing() {
        assert_eq!(stripped_instruction("What is the price of \"Red Kettle\"?"), "what is the price of");
        let ents = entity_tokens("Open the article \"Ferris\"");
        assert_eq!(generalize_url("/wiki/ferris", &ents), "/wiki/*");
        assert_eq!(generalize_url("/product/12", &BTreeSet::new()), "/product/*");
        assert_eq!(generalize_url("/search?q=blue+mug", &BTreeSet::new()), "/search?*");
        assert_eq!(generalize_url("/", &BTreeSet::new()), "/");
    }

    #[test]
    fn descriptor_keywords_exclude_entities() {
        let d = descriptor_for("shoplite", vec!["/".into()], "Search for \"blue mug\"", "search");
        assert_eq!(d.keywords, ["search"]);
        assert_eq!(d.context_cues, ["site:shoplite"]);
        let d = descriptor_for("shoplite", vec!["/".into()], "\"x\"", "price-lookup");
        assert_eq!(d.keywords, ["price", "lookup"]);
    }
}
