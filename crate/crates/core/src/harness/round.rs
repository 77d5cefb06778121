use std::path::Path;

use serde::{Deserialize, Serialize};

use super::suite::Harness;
use crate::canonical::write_canonical;
use crate::error::Result;
use crate::evolution::{collect_feedback, round_update, save_feedback, FeedbackSet};
use crate::induction::{attribute_failure, induce_from_failure, induce_from_success, AttributionMode, Attributor};
use crate::runtime::{write_trajectory, Trajectory};
use crate::sim::Task;
use crate::skill::{save_snapshot, InteractionSkill, ReasoningSkill, SkillEntry, SkillIdAllocator, SkillLibrary};
use crate::taxonomy::FailureClass;

/// How one failed trajectory was attributed and what it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub task_id: String,
    pub class: FailureClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induced: Option<String>,
}

pub struct RoundOutput {
    pub trajectories: Vec<Trajectory>,
    pub new_reasoning: Vec<ReasoningSkill>,
    pub new_interaction: Vec<InteractionSkill>,
    pub attributions: Vec<AttributionRecord>,
    pub feedback: FeedbackSet,
    pub library: SkillLibrary,
}

impl Harness {
    /// Run → induce → attribute → evolve over the training tasks.
    pub fn run_training_round(
        &self,
        train: &[Task],
        library: &SkillLibrary,
        mode: AttributionMode,
    ) -> Result<RoundOutput> {
        let trajectories = self.run_episodes(train, library)?;
        let labels = self.labels();
        let attributor = Attributor {
            mode,
            gateway: Some(self.gateway.as_ref()),
            labels: &labels,
            seed: self.config.seed,
        };
        let mut ids = SkillIdAllocator::new(library.round, library.skill_ids());
        let mut feedback = FeedbackSet::new(library.round);
        let (mut new_reasoning, mut new_interaction, mut attributions) = (Vec::new(), Vec::new(), Vec::new());
        for t in &trajectories {
            feedback.append(collect_feedback(t, library, library.round))?;
            if t.success {
                match induce_from_success(t, &mut ids) {
                    Ok(skill) => new_interaction.push(skill),
                    Err(e) => log::info!("no skill from {}: {e}", t.task_id),
                }
                continue;
            }
            let class = attribute_failure(t, &attributor)?;
            let induced = induce_from_failure(t, &class, &mut ids);
            attributions.push(AttributionRecord {
                task_id: t.task_id.clone(),
                class,
                induced: induced.as_ref().map(|e| e.skill_id().to_string()),
            });
            match induced {
                Some(SkillEntry::Reasoning(r)) => new_reasoning.push(r),
                Some(SkillEntry::Interaction(i)) => new_interaction.push(i),
                None => {}
            }
        }
        let next = round_update(
            library,
            new_reasoning.clone(),
            new_interaction.clone(),
            &feedback.records,
            &self.config.evolution,
        )?;
        Ok(RoundOutput {
            trajectories,
            new_reasoning,
            new_interaction,
            attributions,
            feedback,
            library: next,
        })
    }
}

/// Writes a round's trajectories, attributions, feedback and the resulting
/// library snapshot under `dir`.
pub fn persist_round(out: &RoundOutput, dir: &Path) -> Result<()> {
    let round = out.feedback.round;
    let traj_dir = dir.join(format!("round-{round}")).join("trajectories");
    for t in &out.trajectories {
        write_trajectory(t, &traj_dir)?;
    }
    write_canonical(&out.attributions, &dir.join(format!("round-{round}")).join("attributions.json"))?;
    save_feedback(&out.feedback, dir)?;
    save_snapshot(&out.library, dir)?;
    Ok(())
}
