//! Failure taxonomy shared by the simulator fixtures, attribution and induction.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which skill level a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLevel {
    ErrInteraction,
    ErrReasoning,
}

impl ErrorLevel {
    pub fn flip(self) -> Self {
        match self {
            ErrorLevel::ErrInteraction => ErrorLevel::ErrReasoning,
            ErrorLevel::ErrReasoning => ErrorLevel::ErrInteraction,
        }
    }
}

impl fmt::Display for ErrorLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorLevel::ErrInteraction => "err_interaction",
            ErrorLevel::ErrReasoning => "err_reasoning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureMode {
    AnswerOmission,
    InsufficientExploration,
    TaskMisunderstanding,
    FalseNoData,
    EmptyAnswer,
    RepeatedExecution,
    FormFillFailure,
    Oscillation,
    RepeatedBacktracking,
}

impl FailureMode {
    pub const ALL: [FailureMode; 9] = [
        FailureMode::AnswerOmission,
        FailureMode::InsufficientExploration,
        FailureMode::TaskMisunderstanding,
        FailureMode::FalseNoData,
        FailureMode::EmptyAnswer,
        FailureMode::RepeatedExecution,
        FailureMode::FormFillFailure,
        FailureMode::Oscillation,
        FailureMode::RepeatedBacktracking,
    ];

    pub fn level(self) -> ErrorLevel {
        use FailureMode::*;
        match self {
            AnswerOmission | InsufficientExploration | TaskMisunderstanding | FalseNoData | EmptyAnswer => {
                ErrorLevel::ErrReasoning
            }
            RepeatedExecution | FormFillFailure | Oscillation | RepeatedBacktracking => ErrorLevel::ErrInteraction,
        }
    }

    pub fn as_str(self) -> &'static str {
        use FailureMode::*;
        match self {
            AnswerOmission => "answer-omission",
            InsufficientExploration => "insufficient-exploration",
            TaskMisunderstanding => "task-misunderstanding",
            FalseNoData => "false-no-data",
            EmptyAnswer => "empty-answer",
            RepeatedExecution => "repeated-execution",
            FormFillFailure => "form-fill-failure",
            Oscillation => "oscillation",
            RepeatedBacktracking => "repeated-backtracking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attributed cause of a failed episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureClass {
    pub value: ErrorLevel,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<FailureMode>,
}

impl FailureClass {
    pub fn new(value: ErrorLevel, mode: Option<FailureMode>, rationale: impl Into<String>) -> Self {
        Self {
            value,
            rationale: rationale.into(),
            mode,
        }
    }

    pub fn from_mode(mode: FailureMode, rationale: impl Into<String>) -> Self {
        Self::new(mode.level(), Some(mode), rationale)
    }

    /// Mode, when present, agrees with the level.
    pub fn is_consistent(&self) -> bool {
        self.mode.map_or(true, |m| m.level() == self.value)
    }
}
