use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde::{Deserialize, Deserializer};

use super::suite::Harness;
use crate::canonical::{to_canonical, write_canonical};
use crate::error::{Error, Result};
use crate::runtime::{OutcomeStatus, Trajectory};
use crate::sim::Task;
use crate::skill::SkillLibrary;

fn rate_or_na<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("n/a"),
    }
}

fn rate_or_na_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    Ok(v.as_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    pub tasks: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub round: u32,
    pub drift_version: u32,
    pub tasks: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Interaction-skill invocations that executed (argument failures excluded).
    pub invocations: usize,
    pub invocation_successes: usize,
    /// `"n/a"` when nothing was invoked.
    #[serde(serialize_with = "rate_or_na", deserialize_with = "rate_or_na_de")]
    pub invocation_success_rate: Option<f64>,
    pub mean_steps: f64,
    pub mean_gateway_calls: f64,
    pub reasoning_skills: usize,
    pub interaction_skills: usize,
    pub per_type: BTreeMap<String, TypeBreakdown>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// (succeeded, executed) over all invocations; argument failures do not count.
pub fn invocation_counts(trajectories: &[Trajectory]) -> (usize, usize) {
    let mut total = 0;
    let mut ok = 0;
    for t in trajectories {
        for (_, inv) in t.invocations() {
            if inv.outcome.status == OutcomeStatus::ArgumentFailure {
                continue;
            }
            total += 1;
            ok += usize::from(inv.outcome.is_success());
        }
    }
    (ok, total)
}

pub fn compute_metrics(trajectories: &[Trajectory], library: &SkillLibrary, drift_version: u32) -> Metrics {
    let n = trajectories.len();
    let successes = trajectories.iter().filter(|t| t.success).count();
    let (inv_ok, invocations) = invocation_counts(trajectories);
    let mut per_type: BTreeMap<String, TypeBreakdown> = BTreeMap::new();
    for t in trajectories {
        let e = per_type.entry(t.task_type.clone()).or_insert(TypeBreakdown {
            tasks: 0,
            successes: 0,
            success_rate: 0.0,
        });
        e.tasks += 1;
        e.successes += usize::from(t.success);
    }
    for b in per_type.values_mut() {
        b.success_rate = ratio(b.successes, b.tasks);
    }
    let steps: usize = trajectories.iter().map(Trajectory::action_count).sum();
    let calls: usize = trajectories.iter().map(|t| t.gateway_calls).sum();
    Metrics {
        round: library.round,
        drift_version,
        tasks: n,
        successes,
        success_rate: ratio(successes, n),
        invocations,
        invocation_successes: inv_ok,
        invocation_success_rate: (invocations > 0).then(|| ratio(inv_ok, invocations)),
        mean_steps: ratio(steps, n),
        mean_gateway_calls: ratio(calls, n),
        reasoning_skills: library.reasoning.len(),
        interaction_skills: library.interaction.len(),
        per_type,
    }
}

impl Harness {
    /// Episodes on the test tasks against a fixed library snapshot.
    pub fn run_evaluation(&self, tasks: &[Task], library: &SkillLibrary) -> Result<(Metrics, Vec<Trajectory>)> {
        let trajectories = self.run_episodes(tasks, library)?;
        Ok((compute_metrics(&trajectories, library, self.config.drift_version), trajectories))
    }
}

pub fn summary_table(m: &Metrics) -> String {
    let mut s = String::new();
    let inv = match m.invocation_success_rate {
        Some(r) => format!("{r:.3} ({}/{})", m.invocation_successes, m.invocations),
        None => format!("n/a ({} invocations)", m.invocations),
    };
    let _ = writeln!(s, "{:<24}{:.3} ({}/{})", "task success rate", m.success_rate, m.successes, m.tasks);
    let _ = writeln!(s, "{:<24}{inv}", "invocation success rate");
    let _ = writeln!(s, "{:<24}{:.2}", "mean steps per task", m.mean_steps);
    let _ = writeln!(s, "{:<24}{:.2}", "mean gateway calls", m.mean_gateway_calls);
    let _ = writeln!(
        s,
        "{:<24}{} reasoning, {} interaction (round {}, drift v{})",
        "library", m.reasoning_skills, m.interaction_skills, m.round, m.drift_version
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<20}{:>7}{:>11}{:>8}", "task type", "tasks", "successes", "rate");
    for (ty, b) in &m.per_type {
        let _ = writeln!(s, "{:<20}{:>7}{:>11}{:>8.3}", ty, b.tasks, b.successes, b.success_rate);
    }
    s
}

/// Writes `path` (JSON) and a sibling `.txt` summary table; parent
/// directories are created. Returns the table path.
pub fn emit_report(metrics: &Metrics, path: &Path) -> Result<PathBuf> {
    write_canonical(metrics, path)?;
    let table = path.with_extension("txt");
    std::fs::write(&table, summary_table(metrics)).map_err(|e| Error::io(&table, e))?;
    Ok(table)
}

pub fn metrics_to_string(m: &Metrics) -> String {
    to_canonical(m)
}
