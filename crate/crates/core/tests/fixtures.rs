//! The shipped fixture corpus: gold solutions work at every drift version and
//! the scripted baseline fails exactly where it is meant to.

use std::path::PathBuf;

use webskill_core::harness::Harness;
use webskill_core::induction::rule_oracle;
use webskill_core::runtime::parse_action;
use webskill_core::sim::{Task, WebEnv};
use webskill_core::skill::SkillLibrary;

fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/harness.toml")
}

fn replay(env: &mut WebEnv, task: &Task, version: u32) -> bool {
    env.reset(task).unwrap();
    for line in task.gold_for_version(version) {
        let g = parse_action(line).unwrap_or_else(|e| panic!("{}: {e}", task.task_id));
        let action = g.resolve(&env.current_page().unwrap());
        env.step(&action).unwrap();
        if env.is_terminated() {
            break;
        }
    }
    env.evaluate_task(task).unwrap()
}

#[test]
fn corpus_shape() {
    let h = Harness::from_path(&config_path()).unwrap();
    assert_eq!(h.envs.len(), 3);
    assert_eq!(h.tasks.len(), 36);
    let labelled = h.tasks.iter().filter(|t| t.failure_label.is_some()).count();
    assert_eq!(labelled, 24);
}

#[test]
fn gold_solutions_succeed_at_every_version() {
    let mut h = Harness::from_path(&config_path()).unwrap();
    for version in [0, 1, 2] {
        h.apply_drift(version).unwrap();
        for task in h.tasks.clone() {
            let mut env = h.env_for(&task.site_id).unwrap();
            assert!(replay(&mut env, &task, version), "{} fails at v{version}", task.task_id);
        }
    }
}

#[test]
fn base_gold_breaks_under_selector_drift() {
    let mut h = Harness::from_path(&config_path()).unwrap();
    h.apply_drift(2).unwrap();
    let broken = h
        .tasks
        .clone()
        .into_iter()
        .filter(|t| !t.gold_drift.is_empty())
        .filter(|t| {
            let mut env = h.env_for(&t.site_id).unwrap();
            !replay(&mut env, t, 0)
        })
        .count();
    assert!(broken >= 8, "only {broken} tasks broke");
}

#[test]
fn baseline_fails_in_the_labelled_modes() {
    let h = Harness::from_path(&config_path()).unwrap();
    let trajectories = h.run_episodes(&h.tasks, &SkillLibrary::new()).unwrap();
    for (task, t) in h.tasks.iter().zip(&trajectories) {
        match &task.failure_label {
            None => assert!(t.success, "{} should succeed", task.task_id),
            Some(label) => {
                assert!(!t.success, "{} should fail", task.task_id);
                let class = rule_oracle(t);
                assert_eq!(class.mode, Some(label.mode), "{}", task.task_id);
                assert_eq!(class.value, label.value, "{}", task.task_id);
            }
        }
    }
}
