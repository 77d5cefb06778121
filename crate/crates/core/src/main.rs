use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use webskill_core::harness::{
    emit_report, persist_round, run_experiment, split_tasks, summary_table, Harness, HarnessConfig, PolicyKind,
};
use webskill_core::induction::AttributionMode;
use webskill_core::runtime::{read_trajectory, write_trajectory};
use webskill_core::sim::{SiteSpec, TaskSet};
use webskill_core::skill::{latest_round, load_library, snapshot_path, validate_library, SkillLibrary};

#[derive(Parser)]
#[command(name = "webskill", version, about = "Skill-library experiments on simulated websites")]
struct Cli {
    /// Harness configuration file.
    #[arg(long, global = true, default_value = "crates/core/fixtures/harness.toml")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// rule, lm, label, random or reversed.
    #[arg(long, global = true)]
    attribution: Option<AttributionMode>,
    /// scripted or lm.
    #[arg(long, global = true)]
    policy: Option<String>,
    /// Serves the sites at this UI version.
    #[arg(long, global = true)]
    drift: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Training rounds on the train split, then evaluation on the test split.
    Run {
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        /// Starting library; empty when omitted.
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One training round. Continues from the newest snapshot in --out unless --library is given.
    RunRound {
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluates a fixed library and writes metrics.
    Evaluate {
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long, default_value = "out/evaluation")]
        out: PathBuf,
        /// Evaluate every task instead of the test split.
        #[arg(long)]
        all: bool,
    },
    /// Prints the train/test split.
    Split,
    /// Checks a site file, and its task file if given.
    ValidateSite {
        site: PathBuf,
        #[arg(long)]
        tasks: Option<PathBuf>,
    },
    /// Summarizes a library snapshot.
    InspectLibrary { library: PathBuf },
    /// Prints a recorded trajectory step by step.
    Replay { trajectory: PathBuf },
}

fn harness(cli: &Cli) -> anyhow::Result<Harness> {
    let mut cfg = HarnessConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(a) = cli.attribution {
        cfg.attribution = a;
    }
    if let Some(p) = &cli.policy {
        cfg.policy = match p.as_str() {
            "scripted" => PolicyKind::Scripted,
            "lm" => PolicyKind::Lm,
            other => bail!("unknown policy {other:?}; expected scripted or lm"),
        };
    }
    if let Some(d) = cli.drift {
        cfg.drift_version = d;
    }
    cfg.validate()?;
    Ok(Harness::load(cfg)?)
}

fn library_or_empty(path: Option<&Path>) -> anyhow::Result<SkillLibrary> {
    match path {
        Some(p) => load_library(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SkillLibrary::new()),
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Run { rounds, library, out } => {
            let h = harness(cli)?;
            let lib = library_or_empty(library.as_deref())?;
            let (metrics, lib) = run_experiment(&h, lib, *rounds, out)?;
            print!("{}", summary_table(&metrics));
            println!("library: {} reasoning, {} interaction", lib.reasoning.len(), lib.interaction.len());
        }
        Command::RunRound { library, out } => {
            let h = harness(cli)?;
            let lib = match (library, latest_round(out)?) {
                (Some(p), _) => library_or_empty(Some(p))?,
                (None, Some(n)) => load_library(&snapshot_path(out, n))?,
                (None, None) => SkillLibrary::new(),
            };
            let (train, _) = split_tasks(&h.tasks, h.config.train_fraction, h.config.seed)?;
            let result = h.run_training_round(&train, &lib, h.config.attribution)?;
            persist_round(&result, out)?;
            let ok = result.trajectories.iter().filter(|t| t.success).count();
            println!(
                "round {}: {ok}/{} succeeded, {} reasoning and {} interaction skills induced",
                result.feedback.round,
                result.trajectories.len(),
                result.new_reasoning.len(),
                result.new_interaction.len()
            );
            println!(
                "library now {} reasoning, {} interaction (round {})",
                result.library.reasoning.len(),
                result.library.interaction.len(),
                result.library.round
            );
        }
        Command::Evaluate { library, out, all } => {
            let h = harness(cli)?;
            let lib = library_or_empty(library.as_deref())?;
            let tasks = if *all {
                h.tasks.clone()
            } else {
                split_tasks(&h.tasks, h.config.train_fraction, h.config.seed)?.1
            };
            let (metrics, trajectories) = h.run_evaluation(&tasks, &lib)?;
            for t in &trajectories {
                write_trajectory(t, &out.join("trajectories"))?;
            }
            emit_report(&metrics, &out.join("metrics.json"))?;
            print!("{}", summary_table(&metrics));
        }
        Command::Split => {
            let h = harness(cli)?;
            let (train, test) = split_tasks(&h.tasks, h.config.train_fraction, h.config.seed)?;
            for (name, part) in [("train", &train), ("test", &test)] {
                println!("{name} ({}):", part.len());
                for t in part.iter() {
                    println!("  {} [{}]", t.task_id, t.task_type);
                }
            }
        }
        Command::ValidateSite { site, tasks } => {
            let spec = SiteSpec::load(site)?;
            println!("{}: {} pages, {} transitions, {} drift versions", spec.site_id, spec.pages.len(), spec.transitions.len(), spec.drift_versions.len());
            for dv in &spec.drift_versions {
                spec.pages_at(dv.version)?;
            }
            if let Some(path) = tasks {
                let set = TaskSet::load(path)?;
                for t in &set.tasks {
                    t.validate_against(&spec)?;
                }
                println!("{} tasks ok", set.tasks.len());
            }
        }
        Command::InspectLibrary { library } => {
            let lib = load_library(library)?;
            println!("round {}: {} reasoning, {} interaction", lib.round, lib.reasoning.len(), lib.interaction.len());
            for r in &lib.reasoning {
                let mode = r.mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
                println!("  {} [{mode}] N={} S={} {:?}", r.skill_id, r.usage_count, r.success_count, r.descriptor.url_patterns);
            }
            for i in &lib.interaction {
                let params: Vec<&str> = i.parameters.iter().map(|p| p.name.as_str()).collect();
                println!(
                    "  {} ({}) {} templates, failures {} {:?}",
                    i.skill_id,
                    params.join(", "),
                    i.templates.len(),
                    i.consecutive_patch_failures,
                    i.descriptor.url_patterns
                );
            }
            let report = validate_library(&lib);
            if !report.is_ok() {
                bail!("library does not validate: {}", report.messages().join("; "));
            }
        }
        Command::Replay { trajectory } => {
            let t = read_trajectory(trajectory)?;
            println!("{} [{}] v{}: {}", t.task_id, t.task_type, t.drift_version, t.instruction);
            for s in &t.steps {
                let via = s.interaction_skill.as_deref().map(|id| format!(" via {id}")).unwrap_or_default();
                let guide = s.reasoning_skill.as_deref().map(|id| format!(" guided by {id}")).unwrap_or_default();
                println!("step {} at {}{via}{guide}", s.step_index, s.url);
                for a in &s.actions {
                    println!("    {} -> {}", a.action, a.result);
                }
                if let Some(inv) = &s.invocation {
                    println!("    outcome: {} ({})", inv.outcome.status, inv.outcome.detail);
                }
            }
            let answer = t.answer.as_deref().unwrap_or("(none)");
            println!("success: {}, answer: {answer}", t.success);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
