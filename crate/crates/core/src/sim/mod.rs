//! Deterministic simulated web: declarative sites, scripted transitions,
//! flattened observations, task evaluation and versioned UI drift.

pub mod dom;
pub mod env;
pub mod site;
pub mod task;

pub use dom::{ElementNode, ElementRef, Page};
pub use env::{extract_context, load_site, Action, ActionKind, ElementSnapshot, Observation, PageContext, WebEnv};
pub use site::{SiteSpec, Transition};
pub use task::{SuccessPredicate, Task, TaskSet};
