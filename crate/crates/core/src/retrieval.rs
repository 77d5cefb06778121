//! Two-stage scenario-aware retrieval: structural filtering on page context,
//! then semantic ranking with at most one skill selected per level.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use crate::llm::{Gateway, PromptRequest, RoleTag};
use crate::sim::env::{Observation, PageContext};
use crate::sim::site::glob_match;
use crate::skill::model::{tokenize, Scenario, ScenarioDescriptor};

pub const DEFAULT_THRESHOLD: f64 = 0.3;
pub const INSTRUCTION_WEIGHT: f64 = 0.8;
pub const TITLE_WEIGHT: f64 = 0.2;

/// Match(C_t, U_k): some url pattern admits the page and every cue is present.
pub fn scenario_matches(ctx: &PageContext, d: &ScenarioDescriptor) -> bool {
    d.url_patterns.iter().any(|p| glob_match(p, &ctx.url)) && d.context_cues.iter().all(|c| ctx.present_cues.contains(c))
}

pub fn structural_filter<'a, S: Scenario>(ctx: &PageContext, skills: &'a [S]) -> Vec<&'a S> {
    skills.iter().filter(|s| scenario_matches(ctx, s.descriptor())).collect()
}

/// Compatibility of a descriptor with the current task and page, in [0, 1].
pub trait SemanticScorer {
    fn score(&self, instruction: &str, obs: &Observation, descriptor: &ScenarioDescriptor) -> f64;
}

/// Weighted keyword overlap with instruction tokens and page-title tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl SemanticScorer for LexicalScorer {
    fn score(&self, instruction: &str, obs: &Observation, descriptor: &ScenarioDescriptor) -> f64 {
        semantic_score(instruction, obs, descriptor)
    }
}

pub fn semantic_score(instruction: &str, obs: &Observation, descriptor: &ScenarioDescriptor) -> f64 {
    let keywords: BTreeSet<&str> = descriptor.keywords.iter().map(String::as_str).collect();
    if keywords.is_empty() {
        return 0.0;
    }
    let instr: BTreeSet<String> = tokenize(instruction).into_iter().collect();
    let title: BTreeSet<String> = tokenize(&obs.title).into_iter().collect();
    let n = keywords.len() as f64;
    let hit_instr = keywords.iter().filter(|k| instr.contains(**k)).count() as f64;
    let hit_title = keywords.iter().filter(|k| title.contains(**k)).count() as f64;
    INSTRUCTION_WEIGHT * hit_instr / n + TITLE_WEIGHT * hit_title / n
}

pub const SCORER_SYSTEM_PROMPT: &str = "You judge whether a stored web-agent skill fits the current task. \
Reply with a single number between 0 and 1.";

/// Language-model compatibility judgement; falls back to the lexical score
/// when the reply holds no number in [0, 1].
pub struct GatewayScorer {
    pub gateway: Arc<dyn Gateway>,
}

impl SemanticScorer for GatewayScorer {
    fn score(&self, instruction: &str, obs: &Observation, descriptor: &ScenarioDescriptor) -> f64 {
        let user = format!(
            "Task: {instruction}\nPage title: {}\nSkill scenario: {} (keywords: {})",
            obs.title,
            descriptor.task_semantics,
            descriptor.keywords.join(", ")
        );
        let request = PromptRequest::new(RoleTag::Scorer, SCORER_SYSTEM_PROMPT, user);
        let parsed = match self.gateway.complete(&request) {
            Ok(reply) => reply
                .split(|c: char| !(c.is_ascii_digit() || c == '.'))
                .find_map(|t| t.parse::<f64>().ok())
                .filter(|v| (0.0..=1.0).contains(v)),
            Err(e) => {
                log::warn!("scorer call failed: {e}");
                None
            }
        };
        parsed.unwrap_or_else(|| semantic_score(instruction, obs, descriptor))
    }
}

/// Total order used for selection: higher score, then more specific url
/// patterns, then lexicographically smaller id.
fn rank<S: Scenario>(a: (&S, f64), b: (&S, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.0.descriptor().specificity().cmp(&a.0.descriptor().specificity()))
        .then_with(|| a.0.skill_id().cmp(b.0.skill_id()))
}

/// Select^ℓ: the best candidate scoring at least `threshold`, or none.
pub fn select_skill<'a, S: Scenario>(
    instruction: &str,
    obs: &Observation,
    candidates: &[&'a S],
    threshold: f64,
    scorer: &dyn SemanticScorer,
) -> Option<&'a S> {
    candidates
        .iter()
        .map(|s| (*s, scorer.score(instruction, obs, s.descriptor())))
        .filter(|(_, score)| *score >= threshold)
        .min_by(|a, b| rank(*a, *b))
        .map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::sim::env::extract_context;
    use crate::skill::model::{ReasoningOrigin, ReasoningSkill};

    fn obs(url: &str, title: &str) -> Observation {
        Observation {
            site_id: String::new(),
            step_index: 0,
            url: url.into(),
            title: title.into(),
            page_snapshot: vec![],
            state_view: BTreeMap::new(),
            last_action_result: None,
            modal_open: false,
        }
    }

    fn skill(id: &str, patterns: &[&str], cues: &[&str], semantics: &str) -> ReasoningSkill {
        ReasoningSkill {
            skill_id: id.into(),
            mistake: "m".into(),
            guidance: "g".into(),
            verification: "v".into(),
            descriptor: ScenarioDescriptor::new(
                patterns.iter().map(|s| s.to_string()).collect(),
                cues.iter().map(|s| s.to_string()).collect(),
                semantics,
            ),
            usage_count: 0,
            success_count: 0,
            origin: ReasoningOrigin::FailureInduced,
            mode: None,
        }
    }

    #[test]
    fn structural_filter_examples() {
        let ctx = extract_context(&obs("/product/42", "Mug"));
        let skills = vec![
            skill("r-001-0001", &["*/product/*"], &[], "x"),
            skill("r-001-0002", &["*/product/*"], &["element-present:search-box"], "x"),
        ];
        let kept = structural_filter(&ctx, &skills);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].skill_id, "r-001-0001");
        let empty: Vec<ReasoningSkill> = vec![];
        assert!(structural_filter(&ctx, &empty).is_empty());
    }

    #[test]
    fn score_bounds() {
        let d = ScenarioDescriptor::new(vec!["/".into()], vec![], "search store");
        assert!(semantic_score("please search the store now", &obs("/", "x"), &d) >= 0.8);
        assert_eq!(semantic_score("open the cart", &obs("/", "Cart"), &d), 0.0);
    }

    #[test]
    fn score_by_hand() {
        // keywords {search, cheapest, product}; instruction tokens {find, cheapest, mug};
        // title tokens {shoplite, home}: 0.8 * 1/3 + 0.2 * 0/3.
        let d = ScenarioDescriptor::new(vec!["/".into()], vec![], "search cheapest product");
        let s = semantic_score("find cheapest mug", &obs("/", "ShopLite Home"), &d);
        assert!((s - 0.8 / 3.0).abs() < 1e-12);
        // title contributes its 0.2 share: {product} in "Product page".
        let s = semantic_score("find cheapest mug", &obs("/", "Product page"), &d);
        assert!((s - (0.8 / 3.0 + 0.2 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn selection_threshold_and_ties() {
        let o = obs("/product/4", "Item");
        let a = skill("r-001-0009", &["/product/*"], &[], "add cart");
        let b = skill("r-001-0001", &["*"], &[], "add cart");
        let weak = skill("r-001-0003", &["*"], &[], "refund order");
        let cands = vec![&b, &a, &weak];
        let chosen = select_skill("add it to the cart", &o, &cands, DEFAULT_THRESHOLD, &LexicalScorer).unwrap();
        assert_eq!(chosen.skill_id, "r-001-0009");
        let only_weak = vec![&weak];
        assert!(select_skill("add it to the cart", &o, &only_weak, DEFAULT_THRESHOLD, &LexicalScorer).is_none());
        let twins = [skill("r-001-0005", &["*"], &[], "add cart"), skill("r-001-0004", &["*"], &[], "add cart")];
        let refs: Vec<_> = twins.iter().collect();
        let chosen = select_skill("add to cart", &o, &refs, DEFAULT_THRESHOLD, &LexicalScorer).unwrap();
        assert_eq!(chosen.skill_id, "r-001-0004");
    }

    #[test]
    fn gateway_scorer_parses_or_falls_back() {
        use crate::llm::MockGateway;
        let d = ScenarioDescriptor::new(vec!["/".into()], vec![], "search cheapest product");
        let o = obs("/", "ShopLite Home");
        let sure = GatewayScorer { gateway: Arc::new(MockGateway::default().with_default(RoleTag::Scorer, "0.9")) };
        assert_eq!(sure.score("find cheapest mug", &o, &d), 0.9);
        let vague = GatewayScorer { gateway: Arc::new(MockGateway::default().with_default(RoleTag::Scorer, "maybe")) };
        assert!((vague.score("find cheapest mug", &o, &d) - 0.8 / 3.0).abs() < 1e-12);
    }
}
