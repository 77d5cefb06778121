//! Offline conversion of trajectories into skills: interaction skills from
//! successes, failure attribution, and routing of failures to either level.

pub mod abstraction;
pub mod attribution;
pub mod induce;
pub mod templates;

pub use abstraction::{generalize_url, instruction_entities};
pub use attribution::{attribute_failure, infer_reasoning_mode, rule_oracle, AttributionMode, Attributor};
pub use induce::{induce_from_failure, induce_from_success};
