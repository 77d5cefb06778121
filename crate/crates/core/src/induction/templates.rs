//! Per-mode text for reasoning skills: what went wrong, the corrective
//! principle, and what to verify before finishing.

use crate::taxonomy::FailureMode;

pub fn mode_description(mode: FailureMode) -> &'static str {
    match mode {
        FailureMode::AnswerOmission => "The episode ended without an answer although the task asked for one.",
        FailureMode::InsufficientExploration => {
            "The answer was given before the page holding the evidence was opened."
        }
        FailureMode::TaskMisunderstanding => "The actions pursued a goal other than the one in the instruction.",
        FailureMode::FalseNoData => "The agent reported that no data exists although the page contained it.",
        FailureMode::EmptyAnswer => "The episode stopped with an empty answer on a question task.",
        FailureMode::RepeatedExecution => "The same action was repeated without any visible effect.",
        FailureMode::FormFillFailure => "A form was submitted with fields filled through the wrong control.",
        FailureMode::Oscillation => "Navigation alternated between the same two pages.",
        FailureMode::RepeatedBacktracking => "The agent kept returning to pages it had already left.",
    }
}

/// Corrective principle; policies recognise a mode by this exact sentence.
pub fn corrective_principle(mode: FailureMode) -> &'static str {
    match mode {
        FailureMode::AnswerOmission => "Always finish with an explicit answer action that states the requested value.",
        FailureMode::InsufficientExploration => {
            "Open the detail page of the relevant item before answering; listing summaries can be stale."
        }
        FailureMode::TaskMisunderstanding => {
            "Restate the goal and check every constraint in the instruction before acting."
        }
        FailureMode::FalseNoData => {
            "Expand collapsed or hidden sections and look again before concluding that information is missing."
        }
        FailureMode::EmptyAnswer => "Read the value from the page and submit it as a non-empty answer instead of stopping.",
        FailureMode::RepeatedExecution => "If an action has no visible effect, change the approach instead of repeating it.",
        FailureMode::FormFillFailure => {
            "Use the control type of each field: select options in drop-downs and type only into text inputs."
        }
        FailureMode::Oscillation => {
            "Stay on the target page and clear blocking overlays instead of navigating back and forth."
        }
        FailureMode::RepeatedBacktracking => {
            "Plan the navigation path once and avoid returning to pages already ruled out."
        }
    }
}

pub fn verification(mode: FailureMode) -> &'static str {
    match mode {
        FailureMode::AnswerOmission => "Check that the final action is an answer carrying the requested value.",
        FailureMode::InsufficientExploration => "Check that the evidence page for the item was visited before answering.",
        FailureMode::TaskMisunderstanding => "Check that the final state satisfies every part of the instruction.",
        FailureMode::FalseNoData => "Check that all expandable sections were opened before reporting missing data.",
        FailureMode::EmptyAnswer => "Check that an answer string is produced before stop.",
        FailureMode::RepeatedExecution => "Check that each action changed the page before issuing it again.",
        FailureMode::FormFillFailure => "Check that every field shows the intended value before submitting.",
        FailureMode::Oscillation => "Check that the target page was not left before the task was done.",
        FailureMode::RepeatedBacktracking => "Check that no page was revisited without new information.",
    }
}

/// Phrases that signal a claim of missing information.
pub const NO_DATA_PHRASES: &[&str] = &[
    "no data",
    "not found",
    "not available",
    "unavailable",
    "unknown",
    "none",
    "n/a",
    "no information",
];

pub fn claims_no_data(answer: &str) -> bool {
    let a = answer.trim().to_lowercase();
    NO_DATA_PHRASES.iter().any(|p| a.contains(p))
}

/// The mode whose corrective principle appears in a guidance block, if any.
pub fn modes_in_guidance(guidance: &str) -> Vec<FailureMode> {
    FailureMode::ALL
        .into_iter()
        .filter(|m| guidance.contains(corrective_principle(*m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn tables_are_distinct_per_mode() {
        for f in [mode_description, corrective_principle, verification] {
            let texts: BTreeSet<&str> = FailureMode::ALL.into_iter().map(f).collect();
            assert_eq!(texts.len(), FailureMode::ALL.len());
        }
    }

    #[test]
    fn guidance_detection_is_exact() {
        let block = format!("Guidance: {}", corrective_principle(FailureMode::EmptyAnswer));
        assert_eq!(modes_in_guidance(&block), vec![FailureMode::EmptyAnswer]);
        assert!(modes_in_guidance("").is_empty());
    }

    #[test]
    fn no_data_phrases() {
        assert!(claims_no_data("No data available"));
        assert!(!claims_no_data("2015"));
    }
}
