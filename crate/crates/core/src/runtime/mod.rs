//! The online episode loop: per-step retrieval, guidance injection, skill
//! invocation and primitive fallback under a step budget.

pub mod episode;
pub mod grammar;
pub mod invoke;
pub mod policy;
pub mod trajectory;

pub use episode::{build_guidance, run_episode, Agent, RuntimeConfig, DEFAULT_STEP_BUDGET};
pub use grammar::{parse_action, GrammarAction};
pub use invoke::{
    alternate_selectors, instantiate_args, invoke_interaction, ExecutionLog, ExecutionOutcome, Invocation, ModalInfo,
    OutcomeStatus, TemplateRecord,
};
pub use policy::{primitive_step, Decision, LmPolicy, Policy, PolicyInput, PolicyScript, ScriptedPolicy};
pub use trajectory::{
    perform, read_trajectory, write_trajectory, ActionRecord, InvocationRecord, StepRecord, StepSource, Trajectory,
};
