//! Experiment orchestration: stratified splits, training rounds, evaluation
//! and reports.

pub mod config;
pub mod report;
pub mod round;
pub mod split;
pub mod suite;

use std::path::Path;

pub use config::{HarnessConfig, PolicyKind, ScorerKind, DEFAULT_SEED, DEFAULT_TRAIN_FRACTION};
pub use report::{compute_metrics, emit_report, invocation_counts, summary_table, Metrics, TypeBreakdown};
pub use round::{persist_round, AttributionRecord, RoundOutput};
pub use split::{split_tasks, train_count};
pub use suite::Harness;

use crate::error::Result;
use crate::runtime::write_trajectory;
use crate::skill::{save_snapshot, SkillLibrary};

/// `rounds` training rounds from `library` on the training split, then one
/// evaluation on the test split. Everything lands under `out`.
pub fn run_experiment(harness: &Harness, library: SkillLibrary, rounds: u32, out: &Path) -> Result<(Metrics, SkillLibrary)> {
    let cfg = &harness.config;
    let (train, test) = split_tasks(&harness.tasks, cfg.train_fraction, cfg.seed)?;
    let mut library = library;
    save_snapshot(&library, out)?;
    for _ in 0..rounds {
        let result = harness.run_training_round(&train, &library, cfg.attribution)?;
        persist_round(&result, out)?;
        library = result.library;
    }
    let (metrics, trajectories) = harness.run_evaluation(&test, &library)?;
    for t in &trajectories {
        write_trajectory(t, &out.join("evaluation").join("trajectories"))?;
    }
    emit_report(&metrics, &out.join("metrics.json"))?;
    Ok((metrics, library))
}
