//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary so the lines always show.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture_config, oracle_query, page_strategy, sel_strategy};
use webskill_core::evolution::{round_update, utility, EvolutionConfig, FeedbackRecord};
use webskill_core::harness::{
    invocation_counts, run_experiment, split_tasks, Harness, HarnessConfig, DEFAULT_TRAIN_FRACTION,
};
use webskill_core::induction::{induce_from_success, AttributionMode};
use webskill_core::llm::{remote_attempts, PromptRequest, RoleTag, DEFAULT_TEMPERATURE};
use webskill_core::runtime::{
    instantiate_args, invoke_interaction, parse_action, ExecutionLog, ExecutionOutcome, OutcomeStatus,
    TemplateRecord, Trajectory, DEFAULT_STEP_BUDGET,
};
use webskill_core::selector::{fill_placeholders, parse_selector, query, resolve_chain};
use webskill_core::sim::{Action, Task, WebEnv};
use webskill_core::skill::{
    Intent, InteractionOrigin, InteractionSkill, OperationTemplate, ReasoningOrigin, ReasoningSkill,
    ScenarioDescriptor, SkillIdAllocator, SkillLibrary,
};
use webskill_core::taxonomy::FailureMode;

const ROUNDS: u32 = 3;

type Verdict = Result<String, String>;

#[derive(Default)]
struct Ctx {
    /// Every trajectory produced along the way, for the step-budget check.
    seen: Vec<Trajectory>,
}

fn harness() -> Harness {
    Harness::from_path(&fixture_config()).expect("fixture harness")
}

fn harness_with(mode: AttributionMode) -> Harness {
    let mut cfg = HarnessConfig::load(&fixture_config()).expect("fixture config");
    cfg.attribution = mode;
    Harness::load(cfg).expect("fixture harness")
}

fn train(h: &Harness, tasks: &[Task], rounds: u32, ctx: &mut Ctx) -> SkillLibrary {
    let mut lib = SkillLibrary::new();
    for _ in 0..rounds {
        let out = h.run_training_round(tasks, &lib, h.config.attribution).expect("training round");
        ctx.seen.extend(out.trajectories);
        lib = out.library;
    }
    lib
}

fn success_rate(ts: &[Trajectory]) -> f64 {
    ts.iter().filter(|t| t.success).count() as f64 / ts.len().max(1) as f64
}

fn invocation_rate(ts: &[Trajectory]) -> Option<f64> {
    let (ok, n) = invocation_counts(ts);
    (n > 0).then(|| ok as f64 / n as f64)
}

fn replay(env: &mut WebEnv, task: &Task, gold: &[String]) -> bool {
    env.reset(task).unwrap();
    for line in gold {
        let action = parse_action(line).unwrap().resolve(&env.current_page().unwrap());
        env.step(&action).unwrap();
        if env.is_terminated() {
            break;
        }
    }
    if !env.is_terminated() {
        env.terminate();
    }
    env.evaluate_task(task).unwrap()
}

fn c1_selector_oracle(ctx: &mut Ctx) -> Verdict {
    let mut runner = TestRunner::deterministic();
    let strategy = (page_strategy(), sel_strategy());
    let (mut pages, mut hits) = (0, 0);
    for _ in 0..1000 {
        let (page, sel) = strategy.new_tree(&mut runner).unwrap().current();
        let got: Vec<String> = query(&parse_selector(&sel.render()).unwrap(), &page).into_iter().map(|k| k.0).collect();
        let want = oracle_query(&sel, &page);
        if got != want {
            return Err(format!("{} on page {pages}: engine {got:?}, oracle {want:?}", sel.render()));
        }
        pages += 1;
        hits += usize::from(!want.is_empty());
    }

    let h = harness();
    let (train_set, _) = split_tasks(&h.tasks, h.config.train_fraction, h.config.seed).unwrap();
    let lib = train(&h, &train_set, 1, ctx);
    let mut chains: Vec<Vec<String>> = Vec::new();
    for s in &lib.interaction {
        let args: BTreeMap<String, String> = s.parameters.iter().map(|p| (p.name.clone(), p.example.clone())).collect();
        for t in &s.templates {
            chains.push(t.selector_chain.iter().map(|c| fill_placeholders(c, &args)).collect());
        }
    }
    for t in &h.tasks {
        for v in [0, 2] {
            for line in t.gold_for_version(v) {
                if let Some(sel) = parse_action(line).unwrap().selector {
                    chains.push(vec![sel]);
                }
            }
        }
    }
    let mut checks = 0;
    for env in h.envs.values() {
        for v in 0..=2 {
            for page in env.site().pages_at(v).unwrap() {
                for chain in &chains {
                    let got = resolve_chain(chain, &page).unwrap().map(|r| (r.index, r.element));
                    let want = chain.iter().enumerate().find_map(|(i, src)| {
                        query(&parse_selector(src).unwrap(), &page).into_iter().next().map(|k| (i, k))
                    });
                    if got != want {
                        return Err(format!("chain {chain:?} on {}: {got:?} vs {want:?}", page.url));
                    }
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{pages} random pages ({hits} with matches), {} fixture chains over {checks} page checks", chains.len()))
}

fn c2_gold_replay(_: &mut Ctx) -> Verdict {
    let h = harness();
    let mut count = 0;
    for version in 0..=2 {
        for task in &h.tasks {
            let mut env = h.env_for(&task.site_id).unwrap();
            env.apply_drift(version).unwrap();
            if !replay(&mut env, task, task.gold_for_version(version)) {
                return Err(format!("{} gold fails at v{version}", task.task_id));
            }
            count += 1;
        }
    }
    Ok(format!("{count} replays across ui versions 0 to 2"))
}

fn c3_induction_round_trip(ctx: &mut Ctx) -> Verdict {
    let h = harness();
    let baseline = h.run_episodes(&h.tasks, &SkillLibrary::new()).unwrap();
    let mut ids = SkillIdAllocator::new(0, std::iter::empty());
    let mut n = 0;
    for t in baseline.iter().filter(|t| t.success) {
        let task = h.task(&t.task_id).unwrap();
        let skill = induce_from_success(t, &mut ids).map_err(|e| e.to_string())?;
        let mut env = h.env_for(&task.site_id).unwrap();
        let obs = env.reset(task).unwrap();
        let args = instantiate_args(&skill, &task.instruction, &obs).map_err(|e| format!("{}: {e}", t.task_id))?;
        let inv = invoke_interaction(&skill, &mut env, &args, DEFAULT_STEP_BUDGET).unwrap();
        if !env.is_terminated() {
            env.step(&Action::stop()).unwrap();
        }
        if !inv.outcome.is_success() || !env.evaluate_task(task).unwrap() {
            return Err(format!("{}: outcome {} ({})", t.task_id, inv.outcome.status, inv.outcome.detail));
        }
        n += 1;
    }
    ctx.seen.extend(baseline);
    if n == 0 {
        return Err("no successful baseline trajectories".into());
    }
    Ok(format!("{n} success-induced skills re-invoked with y = 1"))
}

fn c4_drift_repair(ctx: &mut Ctx) -> Verdict {
    let mut h = harness();
    let (train_set, test) = split_tasks(&h.tasks, h.config.train_fraction, h.config.seed).unwrap();
    let affected: Vec<Task> = test.into_iter().filter(|t| !t.gold_drift.is_empty()).collect();
    let lib = train(&h, &train_set, ROUNDS, ctx);
    let pre_t = h.run_episodes(&affected, &lib).unwrap();
    let pre = invocation_rate(&pre_t).ok_or("no invocations before drift")?;
    h.apply_drift(2).unwrap();
    let drift_t = h.run_episodes(&affected, &lib).unwrap();
    let dropped = invocation_rate(&drift_t).unwrap_or(0.0);
    let out = h.run_training_round(&train_set, &lib, h.config.attribution).unwrap();
    let post_t = h.run_episodes(&affected, &out.library).unwrap();
    let post = invocation_rate(&post_t).unwrap_or(0.0);
    ctx.seen.extend(pre_t.into_iter().chain(drift_t).chain(post_t).chain(out.trajectories));
    let detail = format!("{} drift-affected test tasks: pre {pre:.3}, after drift {dropped:.3}, after one round {post:.3}", affected.len());
    if dropped < 1.0 && post >= 0.9 * pre {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c5_attribution_routing(ctx: &mut Ctx) -> Verdict {
    let base_h = harness();
    let n = base_h.tasks.len();
    let failing = base_h.tasks.iter().filter(|t| t.failure_label.is_some()).count();
    let (_, test) = split_tasks(&base_h.tasks, base_h.config.train_fraction, base_h.config.seed).unwrap();
    let baseline = success_rate(&base_h.run_episodes(&test, &SkillLibrary::new()).unwrap());
    let mut rates = Vec::new();
    for mode in [AttributionMode::Label, AttributionMode::Rule, AttributionMode::Random, AttributionMode::Reversed] {
        let h = harness_with(mode);
        let (train_set, test) = split_tasks(&h.tasks, h.config.train_fraction, h.config.seed).unwrap();
        let lib = train(&h, &train_set, ROUNDS, ctx);
        let ts = h.run_episodes(&test, &lib).unwrap();
        rates.push((mode, success_rate(&ts)));
        ctx.seen.extend(ts);
    }
    let ordered = rates.windows(2).all(|w| w[0].1 >= w[1].1);
    let reversed = rates[3].1;
    let detail = format!(
        "{n} tasks ({failing} failure-bearing); {}; baseline {baseline:.3}",
        rates.iter().map(|(m, r)| format!("{m} {r:.3}")).collect::<Vec<_>>().join(", ")
    );
    if n >= 30 && ordered && reversed <= baseline {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c6_utility(_: &mut Ctx) -> Verdict {
    let exact = [(0, 0, 1.0, 0.5), (3, 3, 1.0, 0.8), (10, 2, 1.0, 0.25)];
    for (n, s, l, want) in exact {
        let got = utility(n, s, l);
        if got != want {
            return Err(format!("rho({n},{s},{l}) = {got}, expected {want}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let n = rng.gen_range(0..1000u64);
        let s = rng.gen_range(0..=n);
        let l = rng.gen_range(0.01..10.0);
        let r = utility(n, s, l);
        let up = s < n && utility(n, s + 1, l) <= r;
        if !(r > 0.0 && r < 1.0) || up || utility(n + 1, s, l) >= r {
            return Err(format!("monotonicity fails at N={n} S={s} lambda={l}"));
        }
    }
    Ok("three exact values, 10000 monotonicity cases".into())
}

fn near_duplicate(id: &str, keywords: &str, n: u64, s: u64) -> ReasoningSkill {
    ReasoningSkill {
        skill_id: id.into(),
        mistake: "The episode stopped without submitting the count.".into(),
        guidance: "Submit the number shown on the page as the answer.".into(),
        verification: "Confirm an answer was given before stopping.".into(),
        descriptor: ScenarioDescriptor::new(vec!["/issues?*".into()], vec!["site:tracklite".into()], keywords),
        usage_count: n,
        success_count: s,
        origin: ReasoningOrigin::FailureInduced,
        mode: Some(FailureMode::EmptyAnswer),
    }
}

fn failing_record(skill: &InteractionSkill, round: u32) -> FeedbackRecord {
    FeedbackRecord {
        skill_id: skill.skill_id.clone(),
        descriptor: skill.descriptor.clone(),
        task_id: "shoplite-search-1".into(),
        instruction: "Search the catalog".into(),
        context: vec![],
        args: BTreeMap::new(),
        outcome: Some(ExecutionOutcome { status: OutcomeStatus::NoSelectorMatch, detail: "gone".into() }),
        log: Some(ExecutionLog {
            records: vec![TemplateRecord {
                template_index: 0,
                chain_index: None,
                action: None,
                result: None,
                effect_held: None,
                skipped: false,
            }],
            ..ExecutionLog::default()
        }),
        followup: vec![],
        task_label: false,
        round,
        step_index: 0,
    }
}

fn c7_library_hygiene(_: &mut Ctx) -> Verdict {
    let cfg = EvolutionConfig::default();
    let trio = vec![
        near_duplicate("r-000-0001", "count open issues label", 2, 1),
        near_duplicate("r-000-0002", "count open issues", 3, 2),
        near_duplicate("r-000-0003", "count open issues labels", 1, 1),
    ];
    let next = round_update(&SkillLibrary::new(), trio, vec![], &[], &cfg).map_err(|e| e.to_string())?;
    let [survivor] = next.reasoning.as_slice() else {
        return Err(format!("{} reasoning skills survived", next.reasoning.len()));
    };
    if (survivor.usage_count, survivor.success_count) != (6, 4) {
        return Err(format!("merged counters N={} S={}", survivor.usage_count, survivor.success_count));
    }

    let skill = InteractionSkill {
        skill_id: "i-000-0001".into(),
        descriptor: ScenarioDescriptor::new(vec!["/".into()], vec!["site:shoplite".into()], "search catalog"),
        parameters: vec![],
        templates: vec![OperationTemplate::new(Intent::Click, vec!["#gone".into()])],
        final_check: None,
        consecutive_patch_failures: 0,
        origin: InteractionOrigin::SuccessInduced,
    };
    let mut lib = SkillLibrary { interaction: vec![skill.clone()], ..SkillLibrary::new() };
    let mut alive = Vec::new();
    for _ in 0..cfg.max_patch_failures {
        let fb = [failing_record(&skill, lib.round)];
        lib = round_update(&lib, vec![], vec![], &fb, &cfg).map_err(|e| e.to_string())?;
        alive.push(lib.interaction_skill(&skill.skill_id).map(|s| s.consecutive_patch_failures));
    }
    if alive != [Some(1), Some(2), None] {
        return Err(format!("failure counters by round {alive:?}"));
    }
    Ok(format!("trio merged into {} (N=6, S=4); failing skill pruned at round {}", survivor.skill_id, cfg.max_patch_failures))
}

fn c8_protocol_constants(ctx: &mut Ctx) -> Verdict {
    let longest = ctx.seen.iter().map(Trajectory::action_count).max().unwrap_or(0);
    let minimal = HarnessConfig::from_toml("sites = [\"shoplite\"]", Path::new(".")).map_err(|e| e.to_string())?;
    let request = PromptRequest::new(RoleTag::Policy, "s", "u");
    let checks = [
        (longest <= 20, format!("longest trajectory {longest} actions")),
        (DEFAULT_STEP_BUDGET == 20, format!("step budget {DEFAULT_STEP_BUDGET}")),
        (DEFAULT_TRAIN_FRACTION == 0.30 && minimal.train_fraction == 0.30, format!("train fraction {}", minimal.train_fraction)),
        (DEFAULT_TEMPERATURE == 0.1 && request.temperature == 0.1, format!("temperature {}", request.temperature)),
    ];
    let detail = format!(
        "{} trajectories; {}",
        ctx.seen.len(),
        checks.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join(", ")
    );
    if checks.iter().all(|(ok, _)| *ok) && !ctx.seen.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c9_determinism(_: &mut Ctx) -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment(&harness(), SkillLibrary::new(), ROUNDS, d.path()).map_err(|e| e.to_string())?;
    }
    let (a, b) = (files_under(dirs[0].path()), files_under(dirs[1].path()));
    if !a.contains_key("metrics.json") || !a.keys().any(|k| k.starts_with("library-round-")) {
        return Err("run produced no metrics or snapshots".into());
    }
    if let Some(k) = a.keys().find(|k| a.get(*k) != b.get(*k)) {
        return Err(format!("{k} differs between runs"));
    }
    if a.len() != b.len() {
        return Err(format!("{} vs {} files", a.len(), b.len()));
    }
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn c10_offline(_: &mut Ctx) -> Verdict {
    let h = harness();
    let attempts = remote_attempts();
    if h.config.provider.is_some() {
        return Err("fixture config names a remote provider".into());
    }
    if attempts != 0 {
        return Err(format!("{attempts} remote request(s) attempted"));
    }
    Ok("mock gateway only; 0 remote requests across the suite".into())
}

fn main() {
    type Criterion = (u8, &'static str, Duration, fn(&mut Ctx) -> Verdict);
    let criteria: [Criterion; 10] = [
        (1, "selector oracle equivalence", Duration::from_secs(30), c1_selector_oracle),
        (2, "gold replay", Duration::from_secs(10), c2_gold_replay),
        (3, "induction round-trip", Duration::from_secs(30), c3_induction_round_trip),
        (4, "drift-repair loop", Duration::from_secs(120), c4_drift_repair),
        (5, "attribution-routing ordering", Duration::from_secs(300), c5_attribution_routing),
        (6, "utility formula", Duration::from_secs(30), c6_utility),
        (7, "library hygiene", Duration::from_secs(30), c7_library_hygiene),
        (8, "protocol constants", Duration::from_secs(30), c8_protocol_constants),
        (9, "determinism", Duration::from_secs(120), c9_determinism),
        (10, "offline closure", Duration::from_secs(30), c10_offline),
    ];
    let mut ctx = Ctx::default();
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let verdict = check(&mut ctx);
        let took = start.elapsed();
        let (ok, detail) = match verdict {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.1?}, limit {limit:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!("{} {id:>2} {name}: {detail} [{:.2}s]", if ok { "PASS" } else { "FAIL" }, took.as_secs_f64());
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
