use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::taxonomy::FailureMode;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "do", "does", "for", "from", "has", "have", "how", "i", "in",
    "into", "is", "it", "its", "me", "my", "of", "on", "or", "that", "the", "their", "then", "there", "this", "to",
    "was", "what", "when", "where", "which", "who", "with", "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Lowercase alphanumeric tokens in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercase, stopword-stripped, deduplicated tokens.
pub fn derive_keywords(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Where and when a skill applies: url globs and page cues (U) plus a
/// task-semantic summary (W) with its keyword set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub url_patterns: Vec<String>,
    #[serde(default)]
    pub context_cues: Vec<String>,
    pub task_semantics: String,
    pub keywords: Vec<String>,
}

impl ScenarioDescriptor {
    pub fn new(url_patterns: Vec<String>, context_cues: Vec<String>, task_semantics: impl Into<String>) -> Self {
        let task_semantics = task_semantics.into();
        let keywords = derive_keywords(&task_semantics);
        Self {
            url_patterns,
            context_cues,
            task_semantics,
            keywords,
        }
    }

    /// Literal (non-wildcard) characters across all url patterns.
    pub fn specificity(&self) -> usize {
        self.url_patterns
            .iter()
            .map(|p| p.chars().filter(|c| !matches!(c, '*' | '?' | '[' | ']')).count())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasoningOrigin {
    FailureInduced,
    Merged,
}

/// Corrective guidance distilled from a reasoning-level failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningSkill {
    pub skill_id: String,
    /// Mistake pattern.
    pub mistake: String,
    /// Behavior guidance.
    pub guidance: String,
    /// Verification instruction.
    pub verification: String,
    pub descriptor: ScenarioDescriptor,
    pub usage_count: u64,
    pub success_count: u64,
    pub origin: ReasoningOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<FailureMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    Click,
    Type,
    Select,
    Submit,
    Goto,
    Read,
}

impl Intent {
    pub fn needs_selector(self) -> bool {
        self != Intent::Goto
    }

    pub fn needs_payload(self) -> bool {
        matches!(self, Intent::Type | Intent::Select | Intent::Goto)
    }
}

/// Post-condition checked after an operation (or on the terminal page).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum EffectCheck {
    UrlChangesTo(String),
    ElementAppears(String),
    ValueSet,
    #[default]
    None,
}

impl fmt::Display for EffectCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectCheck::UrlChangesTo(g) => write!(f, "url-changes-to:{g}"),
            EffectCheck::ElementAppears(s) => write!(f, "element-appears:{s}"),
            EffectCheck::ValueSet => f.write_str("value-set"),
            EffectCheck::None => f.write_str("none"),
        }
    }
}

impl FromStr for EffectCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(g) = s.strip_prefix("url-changes-to:") {
            return Ok(EffectCheck::UrlChangesTo(g.to_string()));
        }
        if let Some(sel) = s.strip_prefix("element-appears:") {
            return Ok(EffectCheck::ElementAppears(sel.to_string()));
        }
        match s {
            "value-set" => Ok(EffectCheck::ValueSet),
            "none" => Ok(EffectCheck::None),
            other => Err(format!("unknown effect check {other:?}")),
        }
    }
}

impl Serialize for EffectCheck {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EffectCheck {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn is_none_check(c: &EffectCheck) -> bool {
    *c == EffectCheck::None
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One step of an interaction skill: intent plus ranked alternate locators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationTemplate {
    pub intent: Intent,
    pub selector_chain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument_slot: Option<String>,
    /// Literal payload used when no argument slot is bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "is_none_check")]
    pub expected_effect: EffectCheck,
    /// Skipped instead of failing when no selector matches (recovery branches).
    #[serde(default, skip_serializing_if = "is_false")]
    pub optional: bool,
}

impl OperationTemplate {
    pub fn new(intent: Intent, selector_chain: Vec<String>) -> Self {
        Self {
            intent,
            selector_chain,
            argument_slot: None,
            payload: None,
            expected_effect: EffectCheck::None,
            optional: false,
        }
    }

    pub fn with_slot(mut self, slot: impl Into<String>) -> Self {
        self.argument_slot = Some(slot.into());
        self
    }

    pub fn with_payload(mut self, payload: impl Into<String>) -> Self {
        self.payload = Some(payload.into());
        self
    }

    pub fn with_effect(mut self, effect: EffectCheck) -> Self {
        self.expected_effect = effect;
        self
    }

    pub fn optional(mut self) -> Self {
        self.optional = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub description: String,
    pub example: String,
}

impl Parameter {
    pub fn new(name: impl Into<String>, description: impl Into<String>, example: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            example: example.into(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        !self.example.is_empty() && self.example.chars().all(|c| c.is_ascii_digit())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionOrigin {
    SuccessInduced,
    FailureInduced,
    Patched,
}

/// Parameterized executable procedure invoked closed-loop against a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSkill {
    pub skill_id: String,
    pub descriptor: ScenarioDescriptor,
    #[serde(default)]
    pub parameters: Vec<Parameter>,
    pub templates: Vec<OperationTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_check: Option<EffectCheck>,
    #[serde(default)]
    pub consecutive_patch_failures: u32,
    pub origin: InteractionOrigin,
}

impl InteractionSkill {
    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "lowercase")]
pub enum SkillEntry {
    Reasoning(ReasoningSkill),
    Interaction(InteractionSkill),
}

impl SkillEntry {
    pub fn skill_id(&self) -> &str {
        match self {
            SkillEntry::Reasoning(r) => &r.skill_id,
            SkillEntry::Interaction(i) => &i.skill_id,
        }
    }

    pub fn descriptor(&self) -> &ScenarioDescriptor {
        match self {
            SkillEntry::Reasoning(r) => &r.descriptor,
            SkillEntry::Interaction(i) => &i.descriptor,
        }
    }
}

impl From<ReasoningSkill> for SkillEntry {
    fn from(s: ReasoningSkill) -> Self {
        SkillEntry::Reasoning(s)
    }
}

impl From<InteractionSkill> for SkillEntry {
    fn from(s: InteractionSkill) -> Self {
        SkillEntry::Interaction(s)
    }
}

/// Common view used by retrieval over either level.
pub trait Scenario {
    fn skill_id(&self) -> &str;
    fn descriptor(&self) -> &ScenarioDescriptor;
}

impl Scenario for ReasoningSkill {
    fn skill_id(&self) -> &str {
        &self.skill_id
    }
    fn descriptor(&self) -> &ScenarioDescriptor {
        &self.descriptor
    }
}

impl Scenario for InteractionSkill {
    fn skill_id(&self) -> &str {
        &self.skill_id
    }
    fn descriptor(&self) -> &ScenarioDescriptor {
        &self.descriptor
    }
}

impl Scenario for SkillEntry {
    fn skill_id(&self) -> &str {
        SkillEntry::skill_id(self)
    }
    fn descriptor(&self) -> &ScenarioDescriptor {
        SkillEntry::descriptor(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkillLibrary {
    pub reasoning: Vec<ReasoningSkill>,
    pub interaction: Vec<InteractionSkill>,
    pub round: u32,
}

impl SkillLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.reasoning.len() + self.interaction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn skill_ids(&self) -> impl Iterator<Item = &str> {
        self.reasoning
            .iter()
            .map(|s| s.skill_id.as_str())
            .chain(self.interaction.iter().map(|s| s.skill_id.as_str()))
    }

    pub fn reasoning_skill(&self, id: &str) -> Option<&ReasoningSkill> {
        self.reasoning.iter().find(|s| s.skill_id == id)
    }

    pub fn interaction_skill(&self, id: &str) -> Option<&InteractionSkill> {
        self.interaction.iter().find(|s| s.skill_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Reasoning,
    Interaction,
}

impl Level {
    pub fn prefix(self) -> char {
        match self {
            Level::Reasoning => 'r',
            Level::Interaction => 'i',
        }
    }
}

/// Allocates `<level>-<round>-<counter>` ids, e.g. `i-003-0042`.
#[derive(Debug, Clone)]
pub struct SkillIdAllocator {
    round: u32,
    next: u32,
}

impl SkillIdAllocator {
    /// Counters continue after the highest counter already present in `taken`.
    pub fn new<'a>(round: u32, taken: impl IntoIterator<Item = &'a str>) -> Self {
        let max = taken
            .into_iter()
            .filter_map(|id| id.rsplit('-').next()?.parse::<u32>().ok())
            .max()
            .unwrap_or(0);
        Self { round, next: max + 1 }
    }

    pub fn next(&mut self, level: Level) -> String {
        let id = format!("{}-{:03}-{:04}", level.prefix(), self.round, self.next);
        self.next += 1;
        id
    }
}

pub fn is_well_formed_id(id: &str, level: Level) -> bool {
    let parts: Vec<&str> = id.split('-').collect();
    parts.len() == 3
        && parts[0].len() == 1
        && parts[0].starts_with(level.prefix())
        && parts[1].len() >= 3
        && parts[2].len() >= 4
        && parts[1..].iter().all(|p| p.chars().all(|c| c.is_ascii_digit()))
}
