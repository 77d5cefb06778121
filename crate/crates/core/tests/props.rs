//! Property tests over the library, evolution operators, retrieval and the
//! train/test split.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use webskill_core::evolution::{batch_merge, patch_interaction, utility, FeedbackRecord};
use webskill_core::harness::{split_tasks, train_count, Harness};
use webskill_core::retrieval::{select_skill, LexicalScorer};
use webskill_core::runtime::{ExecutionLog, ExecutionOutcome, OutcomeStatus, TemplateRecord};
use webskill_core::sim::Task;
use webskill_core::skill::{
    library_from_str, library_to_string, validate_entry, EffectCheck, Intent, InteractionOrigin, InteractionSkill,
    OperationTemplate, Parameter, ReasoningOrigin, ReasoningSkill, ScenarioDescriptor, SkillEntry, SkillLibrary,
};
use webskill_core::taxonomy::FailureMode;

const KEYWORDS: &[&str] = &["search", "price", "cart", "issue", "label", "year", "page", "open"];
const PATTERNS: &[&str] = &["/", "/search?*", "/product/*", "/issues*", "/*"];
const REASONING_MODES: &[FailureMode] =
    &[FailureMode::EmptyAnswer, FailureMode::FalseNoData, FailureMode::InsufficientExploration];

fn descriptor() -> impl Strategy<Value = ScenarioDescriptor> {
    (prop::sample::subsequence(PATTERNS, 1..3), prop::sample::subsequence(KEYWORDS, 1..4)).prop_map(|(p, k)| {
        ScenarioDescriptor::new(
            p.into_iter().map(str::to_string).collect(),
            vec!["site:shoplite".into()],
            k.join(" "),
        )
    })
}

fn reasoning(id: u32) -> impl Strategy<Value = ReasoningSkill> {
    (descriptor(), prop::sample::select(REASONING_MODES), 0u64..20, 0u64..20).prop_map(move |(d, mode, a, b)| {
        ReasoningSkill {
            skill_id: format!("r-000-{id:04}"),
            mistake: format!("Mistake {id}."),
            guidance: "Look further before answering.".into(),
            verification: "Check the evidence page.".into(),
            descriptor: d,
            usage_count: a.max(b),
            success_count: a.min(b),
            origin: ReasoningOrigin::FailureInduced,
            mode: Some(mode),
        }
    })
}

fn interaction(id: u32) -> impl Strategy<Value = InteractionSkill> {
    let chain = prop::collection::vec(prop::sample::select(&["#a", "#b", ".c", "text=\"Go\"", "[name=q]"][..]), 1..4);
    (descriptor(), prop::collection::vec(chain, 1..4), any::<bool>()).prop_map(move |(d, chains, slot)| {
        let templates = chains
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                let mut chain: Vec<String> = Vec::new();
                for s in c {
                    if !chain.iter().any(|x| x == s) {
                        chain.push(s.to_string());
                    }
                }
                if j == 0 && slot {
                    OperationTemplate::new(Intent::Type, chain).with_slot("q").with_effect(EffectCheck::ValueSet)
                } else {
                    OperationTemplate::new(Intent::Click, chain)
                }
            })
            .collect();
        InteractionSkill {
            skill_id: format!("i-000-{id:04}"),
            descriptor: d,
            parameters: if slot { vec![Parameter::new("q", "query", "mug")] } else { vec![] },
            templates,
            final_check: None,
            consecutive_patch_failures: 0,
            origin: InteractionOrigin::SuccessInduced,
        }
    })
}

fn reasoning_pool() -> impl Strategy<Value = Vec<ReasoningSkill>> {
    (1usize..8).prop_flat_map(|n| (0..n as u32).map(|i| reasoning(i + 1)).collect::<Vec<_>>())
}

fn record(skill: &InteractionSkill, outcome: OutcomeStatus, picks: &[Option<usize>], label: bool) -> FeedbackRecord {
    let records = skill
        .templates
        .iter()
        .zip(picks)
        .enumerate()
        .map(|(j, (t, pick))| TemplateRecord {
            template_index: j,
            chain_index: pick.filter(|k| *k < t.selector_chain.len()),
            action: None,
            result: None,
            effect_held: None,
            skipped: false,
        })
        .collect();
    FeedbackRecord {
        skill_id: skill.skill_id.clone(),
        descriptor: skill.descriptor.clone(),
        task_id: "t".into(),
        instruction: "search".into(),
        context: vec![],
        args: BTreeMap::new(),
        outcome: Some(ExecutionOutcome { status: outcome, detail: String::new() }),
        log: Some(ExecutionLog { records, ..ExecutionLog::default() }),
        followup: vec![],
        task_label: label,
        round: 0,
        step_index: 0,
    }
}

fn task(i: usize, site: &str, ty: &str) -> Task {
    serde_json::from_value(serde_json::json!({
        "task_id": format!("{site}-{ty}-{i:03}"), "site_id": site, "instruction": "x",
        "task_type": ty, "start_url": "/", "success": {"kind": "url-matches", "pattern": "/"}
    }))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn utility_is_bounded_and_monotone(n in 0u64..500, s_frac in 0.0f64..=1.0, lambda in 0.01f64..10.0) {
        let s = ((n as f64) * s_frac).floor() as u64;
        let rho = utility(n, s, lambda);
        prop_assert!(rho > 0.0 && rho < 1.0);
        if s < n {
            prop_assert!(utility(n, s + 1, lambda) > rho);
        }
        prop_assert!(utility(n + 1, s, lambda) < rho);
        // a success never lowers utility
        prop_assert!(utility(n + 1, s + 1, lambda) >= rho);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn library_round_trips(r in reasoning_pool(), i in interaction(9)) {
        let lib = SkillLibrary { reasoning: r, interaction: vec![i], round: 4 };
        let text = library_to_string(&lib);
        let back = library_from_str(&text, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &lib);
        prop_assert_eq!(library_to_string(&back), text);
    }

    #[test]
    fn merge_conserves_evidence(pool in reasoning_pool(), threshold in 0.1f64..0.95) {
        let n: u64 = pool.iter().map(|s| s.usage_count).sum();
        let s: u64 = pool.iter().map(|s| s.success_count).sum();
        let ids: BTreeSet<String> = pool.iter().map(|s| s.skill_id.clone()).collect();
        let merged = batch_merge(pool.clone(), threshold).unwrap();
        prop_assert_eq!(merged.iter().map(|s| s.usage_count).sum::<u64>(), n);
        prop_assert_eq!(merged.iter().map(|s| s.success_count).sum::<u64>(), s);
        prop_assert!(merged.len() <= pool.len());
        prop_assert!(merged.iter().all(|m| ids.contains(&m.skill_id)));
        for m in merged {
            prop_assert!(validate_entry(&SkillEntry::Reasoning(m)).is_ok());
        }
    }

    #[test]
    fn patching_never_empties_a_chain(
        skill in interaction(1),
        runs in prop::collection::vec(
            (prop::sample::select(&[OutcomeStatus::Success, OutcomeStatus::NoSelectorMatch, OutcomeStatus::NoStateChange][..]),
             prop::collection::vec(prop::option::of(0usize..4), 3),
             any::<bool>()),
            1..6),
    ) {
        let records: Vec<FeedbackRecord> = runs.iter().map(|(o, picks, y)| record(&skill, *o, picks, *y)).collect();
        let refs: Vec<&FeedbackRecord> = records.iter().collect();
        let patched = patch_interaction(&skill, &refs).unwrap();
        prop_assert!(patched.templates.iter().all(|t| !t.selector_chain.is_empty()));
        prop_assert!(validate_entry(&SkillEntry::Interaction(patched)).is_ok());
    }

    #[test]
    fn split_is_a_stratified_partition(
        sizes in prop::collection::vec(1usize..12, 1..5),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let mut tasks = Vec::new();
        for (k, n) in sizes.iter().enumerate() {
            let site = if k % 2 == 0 { "a" } else { "b" };
            for i in 0..*n {
                tasks.push(task(i, site, &format!("t{k}")));
            }
        }
        let (train, test) = split_tasks(&tasks, fraction, seed).unwrap();
        let tr: BTreeSet<&str> = train.iter().map(|t| t.task_id.as_str()).collect();
        let te: BTreeSet<&str> = test.iter().map(|t| t.task_id.as_str()).collect();
        prop_assert!(tr.is_disjoint(&te));
        prop_assert_eq!(tr.len() + te.len(), tasks.len());
        for (k, n) in sizes.iter().enumerate() {
            let ty = format!("t{k}");
            let in_train = train.iter().filter(|t| t.task_type == ty).count();
            prop_assert_eq!(in_train, train_count(*n, fraction));
            if *n >= 2 {
                prop_assert!(in_train >= 1 && in_train < *n);
            }
        }
        let again = split_tasks(&tasks, fraction, seed).unwrap();
        prop_assert_eq!(again, (train, test));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn selection_ignores_candidate_order(
        pool in (1usize..8).prop_flat_map(|n| (0..n as u32).map(|i| reasoning(i + 1)).collect::<Vec<_>>())
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        url in prop::sample::select(&["/", "/search?q=blue+mug", "/product/1"][..]),
        instruction in prop::sample::select(&["Search for the price", "Open the cart page", "What year"][..]),
    ) {
        let h = Harness::from_path(&common::fixture_config()).unwrap();
        let mut env = h.env_for("shoplite").unwrap();
        let t = h.tasks.iter().find(|t| t.site_id == "shoplite").unwrap().clone();
        let mut t = t;
        t.start_url = url.to_string();
        let obs = env.reset(&t).unwrap();
        let (a, b) = pool;
        let ra: Vec<&ReasoningSkill> = a.iter().collect();
        let rb: Vec<&ReasoningSkill> = b.iter().collect();
        let pick = |c: &[&ReasoningSkill]| select_skill(instruction, &obs, c, 0.3, &LexicalScorer).map(|s| s.skill_id.clone());
        prop_assert_eq!(pick(&ra), pick(&rb));
    }
}
