pub mod canonical;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod induction;
pub mod llm;
pub mod retrieval;
pub mod runtime;
pub mod selector;
pub mod sim;
pub mod skill;
pub mod taxonomy;

pub use error::{Error, Result};
