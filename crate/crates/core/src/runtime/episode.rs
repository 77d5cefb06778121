use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::invoke::{instantiate_args, invoke_interaction, ExecutionLog, ExecutionOutcome, OutcomeStatus};
use super::policy::{primitive_step, Policy, PolicyInput};
use super::trajectory::{perform, ActionRecord, InvocationRecord, StepRecord, StepSource, Trajectory};
use crate::error::Result;
use crate::induction::templates::modes_in_guidance;
use crate::llm::Gateway;
use crate::retrieval::{scenario_matches, select_skill, structural_filter, SemanticScorer, DEFAULT_THRESHOLD};
use crate::sim::{extract_context, Task, WebEnv};
use crate::skill::{InteractionSkill, ReasoningSkill, SkillLibrary};

pub const DEFAULT_STEP_BUDGET: usize = 20;

fn default_budget() -> usize {
    DEFAULT_STEP_BUDGET
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    /// Primitive actions per episode, skill-issued ones included.
    #[serde(default = "default_budget")]
    pub step_budget: usize,
    #[serde(default = "default_threshold")]
    pub reasoning_threshold: f64,
    #[serde(default = "default_threshold")]
    pub interaction_threshold: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            step_budget: DEFAULT_STEP_BUDGET,
            reasoning_threshold: DEFAULT_THRESHOLD,
            interaction_threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Pluggable parts of an episode.
pub struct Agent<'a> {
    pub policy: &'a dyn Policy,
    pub scorer: &'a dyn SemanticScorer,
    /// Used only to count calls made during the episode.
    pub gateway: Option<&'a dyn Gateway>,
    pub config: RuntimeConfig,
}

/// The three-part guidance block for a reasoning skill; empty without one.
pub fn build_guidance(skill: Option<&ReasoningSkill>) -> String {
    match skill {
        None => String::new(),
        Some(s) => format!(
            "Known mistake: {}\nGuidance: {}\nVerify before finishing: {}",
            s.mistake, s.guidance, s.verification
        ),
    }
}

/// Runs one episode from reset to termination. Interaction skills are invoked
/// at most once per episode; a failed invocation falls back to primitive steps.
pub fn run_episode(env: &mut WebEnv, task: &Task, library: &SkillLibrary, agent: &Agent<'_>) -> Result<Trajectory> {
    let calls_before = agent.gateway.map_or(0, |g| g.call_count());
    let budget = agent.config.step_budget;
    let mut obs = env.reset(task)?;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut history: Vec<ActionRecord> = Vec::new();
    let mut invoked: BTreeSet<String> = BTreeSet::new();
    let mut guided = BTreeSet::new();

    while !env.is_terminated() && env.steps_taken() < budget {
        let ctx = extract_context(&obs);
        let reasoning = structural_filter(&ctx, &library.reasoning);
        let r = select_skill(&task.instruction, &obs, &reasoning, agent.config.reasoning_threshold, agent.scorer);
        let guidance = build_guidance(r);
        guided.extend(modes_in_guidance(&guidance));
        let interaction: Vec<&InteractionSkill> = structural_filter(&ctx, &library.interaction)
            .into_iter()
            .filter(|s| !invoked.contains(&s.skill_id))
            .collect();
        let i = select_skill(&task.instruction, &obs, &interaction, agent.config.interaction_threshold, agent.scorer);

        let mut record = StepRecord {
            step_index: env.steps_taken(),
            url: obs.url.clone(),
            observation_digest: obs.digest(),
            cues: ctx.present_cues.iter().cloned().collect(),
            reasoning_skill: r.map(|s| s.skill_id.clone()),
            interaction_skill: None,
            source: StepSource::Primitive,
            actions: Vec::new(),
            invocation: None,
        };

        if let Some(skill) = i {
            invoked.insert(skill.skill_id.clone());
            record.interaction_skill = Some(skill.skill_id.clone());
            // applicability: the structural match must still hold and arguments must instantiate
            let applicable = scenario_matches(&extract_context(&env.observe()?), &skill.descriptor);
            match instantiate_args(skill, &task.instruction, &obs) {
                Ok(args) if applicable => {
                    let remaining = budget - env.steps_taken();
                    let inv = invoke_interaction(skill, env, &args, remaining)?;
                    record.source = StepSource::InteractionSkill;
                    history.extend(inv.actions.iter().cloned());
                    record.actions = inv.actions;
                    record.invocation = Some(InvocationRecord {
                        skill_id: skill.skill_id.clone(),
                        args,
                        outcome: inv.outcome,
                        log: inv.log,
                    });
                    steps.push(record);
                    obs = env.observe()?;
                    continue;
                }
                Ok(_) => record.interaction_skill = None,
                Err(detail) => {
                    record.invocation = Some(InvocationRecord {
                        skill_id: skill.skill_id.clone(),
                        args: Default::default(),
                        outcome: ExecutionOutcome {
                            status: OutcomeStatus::ArgumentFailure,
                            detail,
                        },
                        log: ExecutionLog {
                            url_before: obs.url.clone(),
                            url_after: obs.url.clone(),
                            ..ExecutionLog::default()
                        },
                    });
                }
            }
        }

        let page = env.current_page()?;
        let decision = primitive_step(
            agent.policy,
            &PolicyInput {
                task,
                obs: &obs,
                page: &page,
                guidance: &guidance,
                history: &history,
            },
        )?;
        let (action_record, next) = perform(env, &decision.action, decision.selector)?;
        history.push(action_record.clone());
        record.actions.push(action_record);
        steps.push(record);
        obs = next;
    }
    if !env.is_terminated() {
        env.terminate();
    }
    let success = env.evaluate_task(task)?;
    Ok(Trajectory {
        task_id: task.task_id.clone(),
        site_id: task.site_id.clone(),
        task_type: task.task_type.clone(),
        instruction: task.instruction.clone(),
        start_url: task.start_url.clone(),
        drift_version: env.version(),
        answer_task: task.is_answer_task(),
        evidence_url: task.evidence_url.clone(),
        steps,
        success,
        answer: env.answer().map(str::to_string),
        visited: env.visited().to_vec(),
        gateway_calls: agent.gateway.map_or(0, |g| g.call_count()) - calls_before,
        guided_modes: guided.into_iter().collect(),
    })
}
