//! Utility scoring, Merge^r and Prune^r for reasoning skills.

use std::collections::BTreeSet;

use super::EvolutionConfig;
use crate::error::{Error, Result};
use crate::skill::{tokenize, ReasoningOrigin, ReasoningSkill, ScenarioDescriptor};

/// ρ = (S + λ) / (N + 2λ).
pub fn utility(n: u64, s: u64, lambda: f64) -> f64 {
    (s as f64 + lambda) / (n as f64 + 2.0 * lambda)
}

pub fn keyword_jaccard(a: &ScenarioDescriptor, b: &ScenarioDescriptor) -> f64 {
    let x: BTreeSet<&str> = a.keywords.iter().map(String::as_str).collect();
    let y: BTreeSet<&str> = b.keywords.iter().map(String::as_str).collect();
    let union = x.union(&y).count();
    if union == 0 {
        return 1.0;
    }
    x.intersection(&y).count() as f64 / union as f64
}

/// Same failure mode, same site scope, keyword similarity at the threshold.
pub fn mergeable(a: &ReasoningSkill, b: &ReasoningSkill, threshold: f64) -> bool {
    let cues = |s: &ReasoningSkill| s.descriptor.context_cues.iter().cloned().collect::<BTreeSet<_>>();
    a.mode == b.mode && cues(a) == cues(b) && keyword_jaccard(&a.descriptor, &b.descriptor) >= threshold
}

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        current.push(c);
        let end = matches!(c, '.' | '!' | '?') && chars.get(i + 1).map_or(true, |n| n.is_whitespace());
        if end {
            out.push(current.trim().to_string());
            current.clear();
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

fn join_unique<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    let mut seen: Vec<String> = Vec::new();
    for t in texts {
        for s in sentences(t) {
            if !seen.contains(&s) {
                seen.push(s);
            }
        }
    }
    seen.join(" ")
}

/// Merge^r(G): one skill keeping the shared mistake pattern, correction rule
/// and verification condition, with the group's evidence summed. The result
/// takes the smallest skill id of the group.
pub fn merge_reasoning(group: &[ReasoningSkill], threshold: f64) -> Result<ReasoningSkill> {
    if group.len() < 2 {
        return Err(Error::Precondition("a merge group needs at least two skills".into()));
    }
    let mut members: Vec<&ReasoningSkill> = Vec::new();
    for s in group {
        if !members.iter().any(|m| m.skill_id == s.skill_id) {
            members.push(s);
        }
    }
    members.sort_by(|a, b| a.skill_id.cmp(&b.skill_id));
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if !mergeable(a, b, threshold) {
                return Err(Error::Precondition(format!(
                    "{} and {} differ in mode, scope or keywords",
                    a.skill_id, b.skill_id
                )));
            }
        }
    }
    let first = members[0];
    if members.len() == 1 {
        return Ok(first.clone());
    }
    let mut url_patterns: Vec<String> = Vec::new();
    for m in &members {
        for p in &m.descriptor.url_patterns {
            if !url_patterns.contains(p) {
                url_patterns.push(p.clone());
            }
        }
    }
    let mut keywords: Vec<String> = first
        .descriptor
        .keywords
        .iter()
        .filter(|k| members.iter().all(|m| m.descriptor.keywords.contains(k)))
        .cloned()
        .collect();
    if let Some(mode) = first.mode {
        for t in tokenize(mode.as_str()) {
            if !keywords.contains(&t) {
                keywords.push(t);
            }
        }
    }
    Ok(ReasoningSkill {
        skill_id: first.skill_id.clone(),
        mistake: join_unique(members.iter().map(|m| m.mistake.as_str())),
        guidance: join_unique(members.iter().map(|m| m.guidance.as_str())),
        verification: join_unique(members.iter().map(|m| m.verification.as_str())),
        descriptor: ScenarioDescriptor {
            url_patterns,
            context_cues: first.descriptor.context_cues.clone(),
            task_semantics: first.descriptor.task_semantics.clone(),
            keywords,
        },
        usage_count: members.iter().map(|m| m.usage_count).sum(),
        success_count: members.iter().map(|m| m.success_count).sum(),
        origin: ReasoningOrigin::Merged,
        mode: first.mode,
    })
}

/// BatchMerge^r: greedy clustering in skill-id order; a skill joins the first
/// open cluster it is mergeable with member by member.
pub fn batch_merge(skills: Vec<ReasoningSkill>, threshold: f64) -> Result<Vec<ReasoningSkill>> {
    let mut sorted = skills;
    sorted.sort_by(|a, b| a.skill_id.cmp(&b.skill_id));
    let mut clusters: Vec<Vec<ReasoningSkill>> = Vec::new();
    for s in sorted {
        match clusters.iter_mut().find(|c| c.iter().all(|m| mergeable(m, &s, threshold))) {
            Some(c) => c.push(s),
            None => clusters.push(vec![s]),
        }
    }
    clusters
        .into_iter()
        .map(|c| if c.len() == 1 { Ok(c.into_iter().next().expect("one")) } else { merge_reasoning(&c, threshold) })
        .collect()
}

/// Prune^r: drops skills with ρ below the threshold once they have enough
/// evidence; low-usage skills are always kept.
pub fn prune_reasoning(skills: Vec<ReasoningSkill>, cfg: &EvolutionConfig) -> Vec<ReasoningSkill> {
    skills
        .into_iter()
        .filter(|s| {
            let rho = utility(s.usage_count, s.success_count, cfg.smoothing);
            let drop = s.usage_count >= cfg.min_usage_for_prune && rho < cfg.utility_prune_threshold;
            if drop {
                log::info!("pruning {} at utility {rho:.3} over {} uses", s.skill_id, s.usage_count);
            }
            !drop
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::testkit::reasoning;
    use super::*;
    use crate::taxonomy::FailureMode;

    #[test]
    fn utility_values() {
        assert_eq!(utility(0, 0, 1.0), 0.5);
        assert_eq!(utility(3, 3, 1.0), 0.8);
        assert_eq!(utility(10, 2, 1.0), 0.25);
    }

    #[test]
    fn near_duplicates_merge_with_summed_evidence() {
        let a = reasoning("r-000-0002", "count open issues", FailureMode::EmptyAnswer, 2, 1);
        let b = reasoning("r-000-0001", "count open issues label", FailureMode::EmptyAnswer, 3, 3);
        let m = merge_reasoning(&[a.clone(), b.clone()], 0.6).unwrap();
        assert_eq!(m.skill_id, "r-000-0001");
        assert_eq!((m.usage_count, m.success_count), (5, 4));
        assert_eq!(m.origin, ReasoningOrigin::Merged);
        // sentences deduplicated, id-order kept
        assert_eq!(m.mistake, "Mistake seen in r-000-0001. Shared pattern. Mistake seen in r-000-0002.");
        assert_eq!(m.guidance, "Produce an answer.");
        // intersection plus the mode tokens
        assert_eq!(m.descriptor.keywords, ["count", "open", "issues", "empty", "answer"]);
        let dup = merge_reasoning(&[a.clone(), b.clone(), a, b], 0.6).unwrap();
        assert_eq!(dup, m);
    }

    #[test]
    fn different_modes_do_not_merge() {
        let a = reasoning("r-000-0001", "price", FailureMode::EmptyAnswer, 0, 0);
        let b = reasoning("r-000-0002", "price", FailureMode::FalseNoData, 0, 0);
        assert!(matches!(merge_reasoning(&[a.clone(), b.clone()], 0.6), Err(Error::Precondition(_))));
        assert_eq!(batch_merge(vec![b, a], 0.6).unwrap().len(), 2);
        assert!(merge_reasoning(&[reasoning("r-000-0003", "x", FailureMode::EmptyAnswer, 0, 0)], 0.6).is_err());
    }

    #[test]
    fn pruning_spares_low_evidence() {
        let cfg = EvolutionConfig::default();
        let weak_new = reasoning("r-000-0001", "a", FailureMode::EmptyAnswer, 3, 0);
        let weak_old = reasoning("r-000-0002", "b", FailureMode::EmptyAnswer, 4, 0);
        let strong = reasoning("r-000-0003", "c", FailureMode::EmptyAnswer, 4, 4);
        let kept = prune_reasoning(vec![weak_new.clone(), weak_old, strong.clone()], &cfg);
        assert_eq!(kept, [weak_new, strong]);
    }
}
