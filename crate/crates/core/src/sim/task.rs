use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dom::normalize_ws;
use super::site::{glob_match, pattern, SiteSpec};
use crate::error::{Error, Result};
use crate::taxonomy::{ErrorLevel, FailureMode};

/// Declarative condition over the final environment state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SuccessPredicate {
    /// Submitted answer equals the value (case-insensitive, whitespace-normalized).
    AnswerEquals { value: String },
    StateEquals { key: String, value: String },
    /// Final url matches the glob.
    UrlMatches { pattern: String },
    /// Some visited url matches the glob.
    Visited { pattern: String },
    /// An element on the final page carries the text.
    ElementText { element: String, text: String },
    All { all: Vec<SuccessPredicate> },
}

/// Ground-truth attribution for fixture tasks the scripted policy is known to fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureLabel {
    pub value: ErrorLevel,
    pub mode: FailureMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub site_id: String,
    pub instruction: String,
    pub task_type: String,
    pub start_url: String,
    pub success: SuccessPredicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    /// Page that holds the evidence for answer tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_url: Option<String>,
    /// Task facts a scripted policy uses in place of language understanding.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vars: BTreeMap<String, String>,
    /// Reference solution in the policy action grammar.
    #[serde(default)]
    pub gold: Vec<String>,
    /// Drift-adjusted reference solutions, keyed by the first drift version they apply to.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gold_drift: BTreeMap<u32, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_label: Option<FailureLabel>,
}

impl Task {
    pub fn is_answer_task(&self) -> bool {
        self.gold_answer.is_some()
    }

    /// Reference solution valid at a drift version.
    pub fn gold_for_version(&self, version: u32) -> &[String] {
        self.gold_drift
            .range(..=version)
            .next_back()
            .map(|(_, g)| g.as_slice())
            .unwrap_or(&self.gold)
    }

    pub fn validate_against(&self, site: &SiteSpec) -> Result<()> {
        let bad = |msg: String| Error::InvalidTask {
            task: self.task_id.clone(),
            msg,
        };
        if self.site_id != site.site_id {
            return Err(bad(format!("belongs to site {}", self.site_id)));
        }
        if site.page(&self.start_url).is_none() {
            return Err(bad(format!("start url {} not in site", self.start_url)));
        }
        let state_keys = site.state_keys();
        check_predicate(&self.success, site, &state_keys).map_err(bad)?;
        if let Some(e) = &self.evidence_url {
            if site.pages_matching(e).next().is_none() {
                return Err(bad(format!("evidence url {e} matches no page")));
            }
        }
        Ok(())
    }
}

fn check_predicate(
    p: &SuccessPredicate,
    site: &SiteSpec,
    state_keys: &std::collections::BTreeSet<String>,
) -> std::result::Result<(), String> {
    match p {
        SuccessPredicate::AnswerEquals { .. } => Ok(()),
        SuccessPredicate::StateEquals { key, .. } => {
            if state_keys.contains(key) {
                Ok(())
            } else {
                Err(format!("state key {key} is never set"))
            }
        }
        SuccessPredicate::UrlMatches { pattern: g } | SuccessPredicate::Visited { pattern: g } => {
            pattern(g).map_err(|e| e.to_string())?;
            if site.pages_matching(g).next().is_some() {
                Ok(())
            } else {
                Err(format!("pattern {g} matches no page"))
            }
        }
        SuccessPredicate::ElementText { element, .. } => {
            if site.pages.iter().any(|pg| pg.element(element).is_some()) {
                Ok(())
            } else {
                Err(format!("element {element} not in site"))
            }
        }
        SuccessPredicate::All { all } => all.iter().try_for_each(|q| check_predicate(q, site, state_keys)),
    }
}

/// Final environment state a predicate is evaluated against.
pub struct FinalState<'a> {
    pub url: &'a str,
    pub visited: &'a [String],
    pub state: &'a BTreeMap<String, String>,
    pub answer: Option<&'a str>,
    pub element_text: &'a dyn Fn(&str) -> Option<String>,
}

impl SuccessPredicate {
    pub fn holds(&self, fin: &FinalState<'_>) -> bool {
        match self {
            SuccessPredicate::AnswerEquals { value } => fin
                .answer
                .is_some_and(|a| normalize_ws(a).to_lowercase() == normalize_ws(value).to_lowercase()),
            SuccessPredicate::StateEquals { key, value } => fin.state.get(key) == Some(value),
            SuccessPredicate::UrlMatches { pattern } => glob_match(pattern, fin.url),
            SuccessPredicate::Visited { pattern } => fin.visited.iter().any(|u| glob_match(pattern, u)),
            SuccessPredicate::ElementText { element, text } => {
                (fin.element_text)(element).is_some_and(|t| normalize_ws(&t) == normalize_ws(text))
            }
            SuccessPredicate::All { all } => all.iter().all(|p| p.holds(fin)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub site_id: String,
    pub tasks: Vec<Task>,
}

impl TaskSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, &e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gold_override_picks_latest_applicable_version() {
        let mut task: Task = serde_json::from_value(serde_json::json!({
            "task_id": "t", "site_id": "s", "instruction": "i", "task_type": "x",
            "start_url": "/", "success": {"kind": "url-matches", "pattern": "/"},
            "gold": ["stop()"], "gold_drift": {"2": ["answer(\"a\")"]}
        }))
        .unwrap();
        assert_eq!(task.gold_for_version(0), ["stop()"]);
        assert_eq!(task.gold_for_version(1), ["stop()"]);
        assert_eq!(task.gold_for_version(3), ["answer(\"a\")"]);
        task.gold_drift.clear();
        assert_eq!(task.gold_for_version(3), ["stop()"]);
    }

    #[test]
    fn answer_matching_is_normalized() {
        let state = BTreeMap::new();
        let none = |_: &str| None;
        let fin = FinalState { url: "/", visited: &[], state: &state, answer: Some("  $9.00 "), element_text: &none };
        assert!(SuccessPredicate::AnswerEquals { value: "$9.00".into() }.holds(&fin));
        let fin = FinalState { answer: None, ..fin };
        assert!(!SuccessPredicate::AnswerEquals { value: "$9.00".into() }.holds(&fin));
    }
}
