//! Round-wise library maintenance driven by skill-level feedback.

pub mod feedback;
pub mod patch;
pub mod reasoning;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use feedback::{
    classify_local_failure, collect_feedback, feedback_path, load_feedback, save_feedback, FeedbackRecord,
    FeedbackSet, LocalFailure,
};
pub use patch::{patch_interaction, prune_interaction};
pub use reasoning::{batch_merge, merge_reasoning, prune_reasoning, utility};

use crate::error::{Error, Result};
use crate::skill::{validate_library, InteractionSkill, ReasoningSkill, SkillLibrary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// λ in the smoothed utility.
    pub smoothing: f64,
    pub utility_prune_threshold: f64,
    pub min_usage_for_prune: u64,
    pub merge_similarity_threshold: f64,
    /// F: consecutive failed rounds after which an interaction skill is removed.
    pub max_patch_failures: u32,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            smoothing: 1.0,
            utility_prune_threshold: 0.35,
            min_usage_for_prune: 4,
            merge_similarity_threshold: 0.6,
            max_patch_failures: 3,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        let mut problems = Vec::new();
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            problems.push(format!("smoothing must be positive, got {}", self.smoothing));
        }
        if !open_unit(self.utility_prune_threshold) {
            problems.push(format!("utility_prune_threshold must be in (0,1), got {}", self.utility_prune_threshold));
        }
        if !open_unit(self.merge_similarity_threshold) {
            problems.push(format!(
                "merge_similarity_threshold must be in (0,1), got {}",
                self.merge_similarity_threshold
            ));
        }
        if self.max_patch_failures == 0 {
            problems.push("max_patch_failures must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Same scenario, parameter names and templates; parameter examples differ
/// per task instance and are ignored.
fn same_structure(a: &InteractionSkill, b: &InteractionSkill) -> bool {
    let names = |s: &InteractionSkill| s.parameters.iter().map(|p| p.name.clone()).collect::<Vec<_>>();
    a.descriptor == b.descriptor && names(a) == names(b) && a.templates == b.templates
}

/// Library n → n+1 from the new pools and one round's feedback.
///
/// Interaction side: union (structural duplicates of existing skills are
/// dropped), batch patch, prune. Reasoning side: usage counters from the
/// feedback, union, batch merge, prune.
pub fn round_update(
    library: &SkillLibrary,
    new_reasoning: Vec<ReasoningSkill>,
    new_interaction: Vec<InteractionSkill>,
    feedback: &[FeedbackRecord],
    cfg: &EvolutionConfig,
) -> Result<SkillLibrary> {
    cfg.validate()?;
    if let Some(r) = feedback.iter().find(|r| r.round != library.round) {
        return Err(Error::Precondition(format!(
            "feedback from round {} cannot update the library at round {}",
            r.round, library.round
        )));
    }
    let (fi, fr): (Vec<&FeedbackRecord>, Vec<&FeedbackRecord>) = feedback.iter().partition(|r| r.is_interaction());

    let mut interaction = library.interaction.clone();
    for s in new_interaction {
        if !interaction.iter().any(|e| same_structure(e, &s)) {
            interaction.push(s);
        }
    }
    let mut by_skill: BTreeMap<&str, Vec<&FeedbackRecord>> = BTreeMap::new();
    for r in &fi {
        by_skill.entry(r.skill_id.as_str()).or_default().push(r);
    }
    let patched = interaction
        .iter()
        .map(|s| match by_skill.get(s.skill_id.as_str()) {
            Some(records) => patch_interaction(s, records),
            None => Ok(s.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let interaction = prune_interaction(patched, &fi, cfg.max_patch_failures);

    let mut reasoning = library.reasoning.clone();
    for r in &fr {
        if let Some(s) = reasoning.iter_mut().find(|s| s.skill_id == r.skill_id) {
            s.usage_count += 1;
            s.success_count += u64::from(r.task_label);
        }
    }
    reasoning.extend(new_reasoning);
    let reasoning = prune_reasoning(batch_merge(reasoning, cfg.merge_similarity_threshold)?, cfg);

    let next = SkillLibrary {
        reasoning,
        interaction,
        round: library.round + 1,
    };
    let report = validate_library(&next);
    if !report.is_ok() {
        return Err(Error::Validation(report.messages()));
    }
    Ok(next)
}
