//! Declarative site specifications: page templates, scripted transitions and
//! versioned drift rules.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use glob::Pattern;
use serde::{Deserialize, Serialize};

use super::dom::{ElementNode, Page};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerKind {
    Click,
    Type,
    Select,
    Submit,
}

/// Effects of a transition. String values may contain `{form:KEY}`,
/// `{state:KEY}`, `{query:KEY}` (url-encoded, lowercased), `{url}` and
/// `{payload}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "kebab-case")]
pub enum Effect {
    Navigate { url: String },
    SetState { key: String, value: String },
    Increment { key: String },
    Reveal { element: String },
    Hide { element: String },
    OpenModal { element: String },
    Note { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    /// Glob over the current page url.
    pub url: String,
    pub action: TriggerKind,
    pub element: String,
    /// State conditions; `"*"` requires a non-empty value, `""` an empty or absent one.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub requires: BTreeMap<String, String>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DriftRule {
    RenameId {
        page: String,
        element: String,
        to: Option<String>,
    },
    SetClasses {
        page: String,
        element: String,
        classes: Vec<String>,
    },
    ReverseChildren {
        page: String,
        element: String,
    },
    Relabel {
        page: String,
        element: String,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        label: Option<String>,
    },
    SetAttr {
        page: String,
        element: String,
        name: String,
        value: Option<String>,
    },
}

impl DriftRule {
    fn target(&self) -> (&str, &str) {
        match self {
            DriftRule::RenameId { page, element, .. }
            | DriftRule::SetClasses { page, element, .. }
            | DriftRule::ReverseChildren { page, element }
            | DriftRule::Relabel { page, element, .. }
            | DriftRule::SetAttr { page, element, .. } => (page, element),
        }
    }

    fn apply(&self, node: &mut ElementNode) {
        match self {
            DriftRule::RenameId { to, .. } => node.id = to.clone(),
            DriftRule::SetClasses { classes, .. } => node.classes = classes.clone(),
            DriftRule::ReverseChildren { .. } => node.children.reverse(),
            DriftRule::Relabel { text, label, .. } => {
                if text.is_some() {
                    node.text = text.clone();
                }
                if label.is_some() {
                    node.label = label.clone();
                }
            }
            DriftRule::SetAttr { name, value, .. } => match value {
                Some(v) => {
                    node.attrs.insert(name.clone(), v.clone());
                }
                None => {
                    node.attrs.remove(name);
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftVersion {
    pub version: u32,
    pub rules: Vec<DriftRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub site_id: String,
    pub pages: Vec<Page>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub drift_versions: Vec<DriftVersion>,
    #[serde(default)]
    pub active_version: u32,
}

pub(crate) fn pattern(glob: &str) -> Result<Pattern> {
    Pattern::new(glob).map_err(|e| Error::InvalidSite(format!("bad url pattern {glob:?}: {e}")))
}

/// `*` spans any characters, including `/` and `?`.
pub fn glob_match(glob: &str, url: &str) -> bool {
    Pattern::new(glob).map(|p| p.matches(url)).unwrap_or(false)
}

fn has_placeholder(s: &str) -> bool {
    s.contains('{')
}

impl SiteSpec {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let spec: SiteSpec = serde_json::from_str(text).map_err(|e| Error::json(origin, &e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn page(&self, url: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.url == url)
    }

    pub fn pages_matching<'a>(&'a self, glob: &'a str) -> impl Iterator<Item = &'a Page> + 'a {
        self.pages.iter().filter(move |p| glob_match(glob, &p.url))
    }

    /// Keys set by any transition effect.
    pub fn state_keys(&self) -> BTreeSet<String> {
        let mut keys = BTreeSet::new();
        for t in &self.transitions {
            for e in &t.effects {
                match e {
                    Effect::SetState { key, .. } | Effect::Increment { key } => {
                        keys.insert(key.clone());
                    }
                    _ => {}
                }
            }
        }
        for p in &self.pages {
            keys.extend(p.state.keys().cloned());
            keys.extend(p.keys());
        }
        keys
    }

    /// Unique ids per page, closed references in transitions and drift rules.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut urls = BTreeSet::new();
        if self.pages.is_empty() {
            problems.push("site has no pages".to_string());
        }
        for page in &self.pages {
            if page.url.is_empty() {
                problems.push("page with empty url".into());
            }
            if !urls.insert(page.url.as_str()) {
                problems.push(format!("duplicate page url {}", page.url));
            }
            let mut keys = BTreeSet::new();
            let mut ids = BTreeSet::new();
            page.root.walk(&mut |n, _| {
                if !keys.insert(n.key.clone()) {
                    problems.push(format!("page {}: duplicate element key {}", page.url, n.key));
                }
                if let Some(id) = &n.id {
                    if !ids.insert(id.clone()) {
                        problems.push(format!("page {}: duplicate element id {id}", page.url));
                    }
                }
            });
            for k in page.state.keys() {
                if !keys.contains(k) {
                    problems.push(format!("page {}: form value {k} names no element", page.url));
                }
            }
        }
        let element_on = |glob: &str, key: &str| self.pages_matching(glob).any(|p| p.element(key).is_some());
        for (i, t) in self.transitions.iter().enumerate() {
            if let Err(e) = pattern(&t.url) {
                problems.push(e.to_string());
                continue;
            }
            if self.pages_matching(&t.url).next().is_none() {
                problems.push(format!("transition {i}: url {} matches no page", t.url));
            } else if !element_on(&t.url, &t.element) {
                problems.push(format!("transition {i}: unknown element {} on {}", t.element, t.url));
            }
            for e in &t.effects {
                match e {
                    Effect::Navigate { url } if !has_placeholder(url) && self.page(url).is_none() => {
                        problems.push(format!("transition {i}: navigates to unknown page {url}"));
                    }
                    Effect::Reveal { element } | Effect::Hide { element } | Effect::OpenModal { element } => {
                        if !element_on(&t.url, element) {
                            problems.push(format!("transition {i}: unknown element {element} on {}", t.url));
                        }
                    }
                    _ => {}
                }
            }
        }
        let mut versions = BTreeSet::new();
        for dv in &self.drift_versions {
            if dv.version == 0 || !versions.insert(dv.version) {
                problems.push(format!("drift version {} is zero or duplicated", dv.version));
            }
            for rule in &dv.rules {
                let (page, element) = rule.target();
                if pattern(page).is_err() || !element_on(page, element) {
                    problems.push(format!("drift v{}: unknown element {element} on {page}", dv.version));
                }
            }
        }
        if self.active_version != 0 && !versions.contains(&self.active_version) {
            problems.push(format!("active version {} is not defined", self.active_version));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSite(problems.join("; ")))
        }
    }

    /// Page templates with every drift rule up to and including `version`
    /// applied to the base templates.
    pub fn pages_at(&self, version: u32) -> Result<Vec<Page>> {
        if version != 0 && !self.drift_versions.iter().any(|d| d.version == version) {
            return Err(Error::UnknownVersion(version));
        }
        let mut pages = self.pages.clone();
        let mut ordered: Vec<&DriftVersion> = self.drift_versions.iter().filter(|d| d.version <= version).collect();
        ordered.sort_by_key(|d| d.version);
        for dv in ordered {
            for rule in &dv.rules {
                let (glob, element) = rule.target();
                for page in pages.iter_mut().filter(|p| glob_match(glob, &p.url)) {
                    if let Some(node) = page.root.find_mut(element) {
                        rule.apply(node);
                    }
                }
            }
        }
        Ok(pages)
    }
}
