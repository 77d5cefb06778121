//! Failure attribution: which level (interaction procedure or task reasoning)
//! a failed episode should be repaired at.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::templates::claims_no_data;
use crate::error::Result;
use crate::llm::{Gateway, PromptRequest, RoleTag};
use crate::runtime::Trajectory;
use crate::sim::site::glob_match;
use crate::sim::task::FailureLabel;
use crate::sim::ActionKind;
use crate::taxonomy::{ErrorLevel, FailureClass, FailureMode};

/// Note emitted by fixture forms rejecting a submission.
pub const VALIDATION_ERROR: &str = "validation-error";
/// Consecutive identical actions that count as repeated execution.
pub const REPEAT_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionMode {
    Rule,
    Lm,
    Label,
    Random,
    Reversed,
}

impl AttributionMode {
    pub const ALL: [AttributionMode; 5] = [
        AttributionMode::Rule,
        AttributionMode::Lm,
        AttributionMode::Label,
        AttributionMode::Random,
        AttributionMode::Reversed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributionMode::Rule => "rule",
            AttributionMode::Lm => "lm",
            AttributionMode::Label => "label",
            AttributionMode::Random => "random",
            AttributionMode::Reversed => "reversed",
        }
    }
}

impl fmt::Display for AttributionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttributionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown attribution mode {s:?}"))
    }
}

fn collapsed_urls(t: &Trajectory) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for u in &t.visited {
        if out.last() != Some(&u.as_str()) {
            out.push(u);
        }
    }
    out
}

fn has_form_fill_failure(t: &Trajectory) -> bool {
    let mut fields = std::collections::BTreeSet::new();
    for a in t.actions() {
        if matches!(a.action.kind, ActionKind::Type | ActionKind::Select) {
            if let Some(target) = &a.action.target {
                fields.insert(target.as_str().to_string());
            }
        }
        if a.result == VALIDATION_ERROR && fields.len() >= 2 {
            return true;
        }
    }
    false
}

fn has_repeated_execution(t: &Trajectory) -> bool {
    let actions: Vec<String> = t.actions().map(|a| a.action.to_string()).collect();
    actions.windows(REPEAT_THRESHOLD).any(|w| w.iter().all(|a| *a == w[0]))
}

fn has_oscillation(t: &Trajectory) -> bool {
    collapsed_urls(t)
        .windows(4)
        .any(|w| w[0] == w[2] && w[1] == w[3] && w[0] != w[1])
}

fn has_repeated_backtracking(t: &Trajectory) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    let mut returns = 0;
    let urls = collapsed_urls(t);
    for (i, u) in urls.iter().enumerate() {
        if i > 0 && seen.contains(u) {
            returns += 1;
        }
        seen.insert(*u);
    }
    returns >= 2
}

fn evidence_missed(t: &Trajectory) -> bool {
    match &t.evidence_url {
        Some(e) => !t.visited.iter().any(|u| glob_match(e, u)),
        None => false,
    }
}

/// Reasoning-level heuristics only; `task-misunderstanding` when none fires.
pub fn infer_reasoning_mode(t: &Trajectory) -> FailureMode {
    let answer = t.answer.as_deref();
    let stopped = t.actions().last().is_some_and(|a| a.action.kind == ActionKind::Stop);
    if t.answer_task {
        if answer.is_some_and(|a| a.trim().is_empty()) || (answer.is_none() && stopped) {
            return FailureMode::EmptyAnswer;
        }
        if answer.is_some_and(claims_no_data) {
            return FailureMode::FalseNoData;
        }
        if answer.is_some() && evidence_missed(t) {
            return FailureMode::InsufficientExploration;
        }
        if answer.is_none() {
            return FailureMode::AnswerOmission;
        }
    }
    FailureMode::TaskMisunderstanding
}

/// Deterministic trace heuristics, checked in a fixed order.
pub fn rule_oracle(t: &Trajectory) -> FailureClass {
    let interaction = [
        (has_form_fill_failure(t), FailureMode::FormFillFailure, "a form was rejected after fields were filled"),
        (has_repeated_execution(t), FailureMode::RepeatedExecution, "the same action ran three times in a row"),
        (has_oscillation(t), FailureMode::Oscillation, "navigation cycled between two pages"),
        (has_repeated_backtracking(t), FailureMode::RepeatedBacktracking, "earlier pages were revisited repeatedly"),
    ];
    if let Some((_, mode, why)) = interaction.into_iter().find(|(hit, _, _)| *hit) {
        return FailureClass::from_mode(mode, why);
    }
    let mode = infer_reasoning_mode(t);
    let why = match mode {
        FailureMode::EmptyAnswer => "the episode stopped without an answer string",
        FailureMode::FalseNoData => "the answer claimed that no data exists",
        FailureMode::InsufficientExploration => "the evidence page was never visited",
        FailureMode::AnswerOmission => "no answer was given before the budget ran out",
        _ => "no interaction symptom was found",
    };
    FailureClass::from_mode(mode, why)
}

pub const ATTRIBUTION_SYSTEM_PROMPT: &str = "You analyse failed web-agent episodes. Answer the question with yes or no \
on the first line, then one sentence of rationale.";

pub fn counterfactual_prompt(t: &Trajectory) -> String {
    let mut s = format!("Task: {}\nActions:\n", t.instruction);
    for a in t.actions() {
        s.push_str(&format!("- {} on {} -> {}\n", a.action, a.url_before, a.result));
    }
    s.push_str(&format!("Final answer: {}\n", t.answer.as_deref().unwrap_or("(none)")));
    s.push_str(
        "Question: could the task have succeeded with the same intent but a different interaction procedure?",
    );
    s
}

fn parse_verdict(reply: &str) -> Option<(ErrorLevel, String)> {
    let mut lines = reply.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next()?;
    let word: String = first.chars().take_while(|c| c.is_alphabetic()).collect::<String>().to_lowercase();
    let value = match word.as_str() {
        "yes" => ErrorLevel::ErrInteraction,
        "no" => ErrorLevel::ErrReasoning,
        _ => return None,
    };
    let rationale = lines.collect::<Vec<_>>().join(" ");
    Some((value, rationale))
}

pub struct Attributor<'a> {
    pub mode: AttributionMode,
    pub gateway: Option<&'a dyn Gateway>,
    /// Ground-truth labels by task id, for the label mode.
    pub labels: &'a BTreeMap<String, FailureLabel>,
    pub seed: u64,
}

impl<'a> Attributor<'a> {
    pub fn rule() -> Self {
        static EMPTY: BTreeMap<String, FailureLabel> = BTreeMap::new();
        Self {
            mode: AttributionMode::Rule,
            gateway: None,
            labels: &EMPTY,
            seed: 0,
        }
    }

    fn lm(&self, t: &Trajectory) -> Result<FailureClass> {
        let Some(gw) = self.gateway else {
            log::warn!("lm attribution without a gateway; using the rule oracle for {}", t.task_id);
            return Ok(rule_oracle(t));
        };
        let request = PromptRequest::new(RoleTag::Attributor, ATTRIBUTION_SYSTEM_PROMPT, counterfactual_prompt(t));
        let reply = gw.complete(&request)?;
        match parse_verdict(&reply) {
            Some((value, rationale)) => Ok(FailureClass::new(value, None, rationale)),
            None => {
                log::warn!("unparseable attribution verdict for {}; using the rule oracle", t.task_id);
                Ok(rule_oracle(t))
            }
        }
    }

    fn coin(&self, task_id: &str) -> bool {
        let h = Sha256::digest(task_id.as_bytes());
        let salt = u64::from_le_bytes(h[..8].try_into().expect("8 bytes"));
        ChaCha8Rng::seed_from_u64(self.seed ^ salt).gen_bool(0.5)
    }
}

/// c ∈ {err_interaction, err_reasoning} for a failed trajectory.
pub fn attribute_failure(t: &Trajectory, attributor: &Attributor<'_>) -> Result<FailureClass> {
    Ok(match attributor.mode {
        AttributionMode::Rule => rule_oracle(t),
        AttributionMode::Lm => attributor.lm(t)?,
        AttributionMode::Label => match attributor.labels.get(&t.task_id) {
            Some(l) => FailureClass::from_mode(l.mode, "ground-truth label"),
            None => {
                log::info!("no label for {}; using the rule oracle", t.task_id);
                rule_oracle(t)
            }
        },
        AttributionMode::Random => {
            let value = if attributor.coin(&t.task_id) {
                ErrorLevel::ErrInteraction
            } else {
                ErrorLevel::ErrReasoning
            };
            FailureClass::new(value, None, "seeded coin flip")
        }
        AttributionMode::Reversed => {
            let base = attributor.lm(t)?;
            FailureClass::new(base.value.flip(), None, format!("reversed: {}", base.rationale))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::*;
    use crate::llm::MockGateway;
    use crate::sim::Action;

    #[test]
    fn repeated_blocked_clicks_are_repeated_execution() {
        let t = run(&task(None), vec![click("go"), click("go"), click("go"), Action::stop()]);
        let c = rule_oracle(&t);
        assert_eq!(c.mode, Some(FailureMode::RepeatedExecution));
        assert_eq!(c.value, ErrorLevel::ErrInteraction);
    }

    #[test]
    fn two_page_cycle_is_oscillation() {
        let t = run(
            &task(None),
            // the promo modal comes back on every visit to the home page
            vec![click("promo-close"), click("to-b"), click("home"), click("promo-close"), click("to-b"), click("home")],
        );
        assert_eq!(rule_oracle(&t).mode, Some(FailureMode::Oscillation));
    }

    #[test]
    fn reasoning_modes_from_the_answer() {
        let stop = run(&task(Some("$4")), vec![Action::stop()]);
        assert_eq!(rule_oracle(&stop).mode, Some(FailureMode::EmptyAnswer));
        let nodata = run(&task(Some("$4")), vec![Action::answer("No data available")]);
        assert_eq!(rule_oracle(&nodata).mode, Some(FailureMode::FalseNoData));
        let guess = run(&task(Some("$4")), vec![Action::answer("$9")]);
        assert_eq!(rule_oracle(&guess).mode, Some(FailureMode::InsufficientExploration));
        let plain = run(&task(None), vec![Action::stop()]);
        assert_eq!(rule_oracle(&plain).mode, Some(FailureMode::TaskMisunderstanding));
        assert_eq!(rule_oracle(&plain).value, ErrorLevel::ErrReasoning);
    }

    #[test]
    fn routing_modes() {
        let t = run(&task(Some("$4")), vec![Action::stop()]);
        let mut labels = BTreeMap::new();
        labels.insert(
            "mini-1".to_string(),
            FailureLabel { value: ErrorLevel::ErrInteraction, mode: FailureMode::Oscillation },
        );
        let gw = MockGateway::default().with_default(RoleTag::Attributor, "Yes\nthe clicks were wrong");
        let mut a = Attributor { mode: AttributionMode::Label, gateway: Some(&gw), labels: &labels, seed: 3 };
        assert_eq!(attribute_failure(&t, &a).unwrap().mode, Some(FailureMode::Oscillation));
        a.mode = AttributionMode::Lm;
        let lm = attribute_failure(&t, &a).unwrap();
        assert_eq!((lm.value, lm.rationale.as_str()), (ErrorLevel::ErrInteraction, "the clicks were wrong"));
        a.mode = AttributionMode::Reversed;
        assert_eq!(attribute_failure(&t, &a).unwrap().value, ErrorLevel::ErrReasoning);
        a.mode = AttributionMode::Random;
        let first = attribute_failure(&t, &a).unwrap();
        assert_eq!(first, attribute_failure(&t, &a).unwrap());
    }

    #[test]
    fn unparseable_verdict_falls_back_to_rules() {
        let t = run(&task(Some("$4")), vec![Action::stop()]);
        let gw = MockGateway::default().with_default(RoleTag::Attributor, "maybe");
        let labels = BTreeMap::new();
        let a = Attributor { mode: AttributionMode::Lm, gateway: Some(&gw), labels: &labels, seed: 0 };
        assert_eq!(attribute_failure(&t, &a).unwrap(), rule_oracle(&t));
        assert!(parse_verdict("No.\nbecause").is_some_and(|(v, r)| v == ErrorLevel::ErrReasoning && r == "because"));
        assert_eq!("reversed".parse::<AttributionMode>(), Ok(AttributionMode::Reversed));
    }
}
