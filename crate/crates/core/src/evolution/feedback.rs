//! Per-invocation feedback records φ and their per-round persistence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canonical::{read_json, write_canonical};
use crate::error::{Error, Result};
use crate::runtime::{ActionRecord, ExecutionLog, ExecutionOutcome, OutcomeStatus, StepSource, Trajectory};
use crate::skill::{ScenarioDescriptor, SkillLibrary};

/// φ = ⟨k, d, q, C, X, e, Δ, y⟩ for one selected skill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub skill_id: String,
    pub descriptor: ScenarioDescriptor,
    pub task_id: String,
    pub instruction: String,
    /// Context cues present when the skill was selected.
    pub context: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub args: BTreeMap<String, String>,
    /// Present iff the skill is an interaction skill.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<ExecutionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<ExecutionLog>,
    /// Primitive actions taken after the invocation in the same episode; the
    /// source of replacement selectors when the episode still succeeded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub followup: Vec<ActionRecord>,
    pub task_label: bool,
    pub round: u32,
    pub step_index: usize,
}

impl FeedbackRecord {
    pub fn is_interaction(&self) -> bool {
        self.outcome.is_some()
    }
}

/// Records for one episode: one per interaction invocation, in step order, and
/// one per reasoning skill at the first step it was injected. Invocations that
/// could not bind their arguments never ran and leave no record.
pub fn collect_feedback(t: &Trajectory, library: &SkillLibrary, round: u32) -> Vec<FeedbackRecord> {
    let mut out = Vec::new();
    let mut seen_reasoning = std::collections::BTreeSet::new();
    for (si, step) in t.steps.iter().enumerate() {
        if let Some(rid) = &step.reasoning_skill {
            if let Some(skill) = library.reasoning_skill(rid) {
                if seen_reasoning.insert(rid.clone()) {
                    out.push(FeedbackRecord {
                        skill_id: rid.clone(),
                        descriptor: skill.descriptor.clone(),
                        task_id: t.task_id.clone(),
                        instruction: t.instruction.clone(),
                        context: step.cues.clone(),
                        args: BTreeMap::new(),
                        outcome: None,
                        log: None,
                        followup: Vec::new(),
                        task_label: t.success,
                        round,
                        step_index: step.step_index,
                    });
                }
            }
        }
        let Some(inv) = &step.invocation else { continue };
        if inv.outcome.status == OutcomeStatus::ArgumentFailure {
            continue;
        }
        let Some(skill) = library.interaction_skill(&inv.skill_id) else { continue };
        let followup = t.steps[si + 1..]
            .iter()
            .filter(|s| s.source == StepSource::Primitive)
            .flat_map(|s| s.actions.iter().cloned())
            .collect();
        out.push(FeedbackRecord {
            skill_id: inv.skill_id.clone(),
            descriptor: skill.descriptor.clone(),
            task_id: t.task_id.clone(),
            instruction: t.instruction.clone(),
            context: step.cues.clone(),
            args: inv.args.clone(),
            outcome: Some(inv.outcome.clone()),
            log: Some(inv.log.clone()),
            followup,
            task_label: t.success,
            round,
            step_index: step.step_index,
        });
    }
    out.sort_by_key(|r| r.step_index);
    out
}

/// Φ_n: append-only within a round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSet {
    pub round: u32,
    pub records: Vec<FeedbackRecord>,
}

impl FeedbackSet {
    pub fn new(round: u32) -> Self {
        Self { round, records: Vec::new() }
    }

    pub fn append(&mut self, records: impl IntoIterator<Item = FeedbackRecord>) -> Result<()> {
        for r in records {
            if r.round != self.round {
                return Err(Error::Precondition(format!(
                    "record for round {} appended to round {}",
                    r.round, self.round
                )));
            }
            self.records.push(r);
        }
        Ok(())
    }

    pub fn interaction(&self) -> impl Iterator<Item = &FeedbackRecord> {
        self.records.iter().filter(|r| r.is_interaction())
    }

    pub fn reasoning(&self) -> impl Iterator<Item = &FeedbackRecord> {
        self.records.iter().filter(|r| !r.is_interaction())
    }
}

pub fn feedback_path(dir: &Path, round: u32) -> PathBuf {
    dir.join(format!("feedback-round-{round}.json"))
}

pub fn save_feedback(set: &FeedbackSet, dir: &Path) -> Result<PathBuf> {
    let path = feedback_path(dir, set.round);
    write_canonical(set, &path)?;
    Ok(path)
}

pub fn load_feedback(path: &Path) -> Result<FeedbackSet> {
    read_json(path)
}

/// The four local failure cases of an interaction invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalFailure {
    /// No selector in the chain matched.
    NoSelectorMatch,
    /// The url or page state did not change as expected.
    NoStateChange,
    /// No expected result appeared.
    NoResult,
    /// The final page violates the skill check.
    CheckViolation,
}

/// `None` for a successful invocation.
pub fn classify_local_failure(record: &FeedbackRecord) -> Result<Option<LocalFailure>> {
    let outcome = record
        .outcome
        .as_ref()
        .ok_or_else(|| Error::Precondition(format!("record for {} is not an interaction record", record.skill_id)))?;
    Ok(match outcome.status {
        OutcomeStatus::Success => None,
        OutcomeStatus::NoSelectorMatch => Some(LocalFailure::NoSelectorMatch),
        OutcomeStatus::NoStateChange => Some(LocalFailure::NoStateChange),
        OutcomeStatus::NoResult => Some(LocalFailure::NoResult),
        OutcomeStatus::CheckViolation => Some(LocalFailure::CheckViolation),
        OutcomeStatus::ArgumentFailure => {
            return Err(Error::Precondition(format!(
                "invocation of {} never ran; argument failures carry no local outcome",
                record.skill_id
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::testkit::record;
    use super::*;

    #[test]
    fn outcome_maps_to_case() {
        let case = |s| classify_local_failure(&record("i-000-0001", s, vec![], true)).unwrap();
        assert_eq!(case(OutcomeStatus::NoSelectorMatch), Some(LocalFailure::NoSelectorMatch));
        assert_eq!(case(OutcomeStatus::NoStateChange), Some(LocalFailure::NoStateChange));
        assert_eq!(case(OutcomeStatus::NoResult), Some(LocalFailure::NoResult));
        assert_eq!(case(OutcomeStatus::CheckViolation), Some(LocalFailure::CheckViolation));
        assert_eq!(case(OutcomeStatus::Success), None);
        let mut r = record("r-000-0001", OutcomeStatus::Success, vec![], true);
        r.outcome = None;
        assert!(classify_local_failure(&r).is_err());
    }

    #[test]
    fn feedback_set_is_round_scoped_and_persists() {
        let mut set = FeedbackSet::new(0);
        set.append([record("i-000-0001", OutcomeStatus::Success, vec![], true)]).unwrap();
        let mut late = record("i-000-0001", OutcomeStatus::Success, vec![], true);
        late.round = 1;
        assert!(set.append([late]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = save_feedback(&set, dir.path()).unwrap();
        assert!(path.ends_with("feedback-round-0.json"));
        assert_eq!(load_feedback(&path).unwrap(), set);
    }
}
