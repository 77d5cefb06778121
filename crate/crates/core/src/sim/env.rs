//! Episode execution over a site: reset, step, observe, evaluate, drift.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dom::{ElementNode, ElementRef, Page};
use super::site::{glob_match, Effect, SiteSpec, TriggerKind};
use super::task::{FinalState, Task};
use crate::error::{Error, Result};

pub const NOT_FOUND_TITLE: &str = "Not found";

/// Result notes reported in [`Observation::last_action_result`].
pub mod notes {
    pub const NO_EFFECT: &str = "no-effect";
    pub const BLOCKED: &str = "blocked-by-modal";
    pub const NAVIGATED: &str = "navigated";
    pub const STATE_CHANGED: &str = "state-changed";
    pub const VALUE_SET: &str = "value-set";
    pub const FOCUSED: &str = "focused";
    pub const NOT_FOUND: &str = "not-found";
    pub const ANSWERED: &str = "answered";
    pub const STOPPED: &str = "stopped";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Click,
    Type,
    Select,
    Submit,
    Goto,
    Answer,
    Stop,
}

impl ActionKind {
    pub fn needs_target(self) -> bool {
        matches!(self, ActionKind::Click | ActionKind::Type | ActionKind::Select | ActionKind::Submit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::Type => "type",
            ActionKind::Select => "select",
            ActionKind::Submit => "submit",
            ActionKind::Goto => "goto",
            ActionKind::Answer => "answer",
            ActionKind::Stop => "stop",
        }
    }

    fn trigger(self) -> Option<TriggerKind> {
        match self {
            ActionKind::Click => Some(TriggerKind::Click),
            ActionKind::Type => Some(TriggerKind::Type),
            ActionKind::Select => Some(TriggerKind::Select),
            ActionKind::Submit => Some(TriggerKind::Submit),
            _ => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A primitive action with its target already resolved to an element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ElementRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl Action {
    pub fn click(target: ElementRef) -> Self {
        Self { kind: ActionKind::Click, target: Some(target), payload: None }
    }

    pub fn submit(target: ElementRef) -> Self {
        Self { kind: ActionKind::Submit, target: Some(target), payload: None }
    }

    pub fn type_text(target: ElementRef, text: impl Into<String>) -> Self {
        Self { kind: ActionKind::Type, target: Some(target), payload: Some(text.into()) }
    }

    pub fn select(target: ElementRef, option: impl Into<String>) -> Self {
        Self { kind: ActionKind::Select, target: Some(target), payload: Some(option.into()) }
    }

    pub fn goto(url: impl Into<String>) -> Self {
        Self { kind: ActionKind::Goto, target: None, payload: Some(url.into()) }
    }

    pub fn answer(text: impl Into<String>) -> Self {
        Self { kind: ActionKind::Answer, target: None, payload: Some(text.into()) }
    }

    pub fn stop() -> Self {
        Self { kind: ActionKind::Stop, target: None, payload: None }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, ActionKind::Answer | ActionKind::Stop)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidAction(format!("{}: {m}", self.kind)));
        match self.kind {
            k if k.needs_target() && self.target.is_none() => bad("requires a target"),
            ActionKind::Type | ActionKind::Select if self.payload.is_none() => bad("requires a payload"),
            ActionKind::Goto if self.payload.is_none() => bad("requires a url"),
            ActionKind::Goto | ActionKind::Answer | ActionKind::Stop if self.target.is_some() => {
                bad("takes no target")
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        let mut first = true;
        if let Some(t) = &self.target {
            write!(f, "@{t}")?;
            first = false;
        }
        if let Some(p) = &self.payload {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{p:?}")?;
        }
        f.write_str(")")
    }
}

/// One flattened element of the observation, with locator metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSnapshot {
    pub key: ElementRef,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub interactive: bool,
    #[serde(default)]
    pub in_modal: bool,
}

impl ElementSnapshot {
    fn of(node: &ElementNode, in_modal: bool) -> Self {
        Self {
            key: node.key(),
            tag: node.tag.clone(),
            id: node.id.clone(),
            classes: node.classes.clone(),
            attrs: node.attrs.clone(),
            text: node.text.clone(),
            label: node.label.clone(),
            interactive: node.is_interactive(),
            in_modal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(default)]
    pub site_id: String,
    pub step_index: usize,
    pub url: String,
    pub title: String,
    pub page_snapshot: Vec<ElementSnapshot>,
    pub state_view: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_action_result: Option<String>,
    pub modal_open: bool,
}

impl Observation {
    pub fn element(&self, key: &str) -> Option<&ElementSnapshot> {
        self.page_snapshot.iter().find(|e| e.key.as_str() == key)
    }

    /// Short content hash used in step logs.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("observation serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub const CUE_ELEMENT_PRESENT: &str = "element-present:";
pub const CUE_MODAL_OPEN: &str = "modal-open";
pub const CUE_FORM_PRESENT: &str = "form-present";
/// Site identity; urls are host-relative, so descriptors scope themselves with it.
pub const CUE_SITE: &str = "site:";

pub fn site_cue(site_id: &str) -> String {
    format!("{CUE_SITE}{site_id}")
}

/// Whether a context-cue name belongs to a registered predicate family.
pub fn is_registered_cue(name: &str) -> bool {
    if let Some(key) = name.strip_prefix(CUE_ELEMENT_PRESENT) {
        return !key.is_empty();
    }
    if let Some(site) = name.strip_prefix(CUE_SITE) {
        return !site.is_empty();
    }
    name == CUE_MODAL_OPEN || name == CUE_FORM_PRESENT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageContext {
    pub url: String,
    pub present_cues: BTreeSet<String>,
    pub interactive_count: usize,
}

pub fn extract_context(obs: &Observation) -> PageContext {
    let mut cues = BTreeSet::new();
    if !obs.site_id.is_empty() {
        cues.insert(site_cue(&obs.site_id));
    }
    for el in &obs.page_snapshot {
        cues.insert(format!("{CUE_ELEMENT_PRESENT}{}", el.key));
        if el.tag == "form" {
            cues.insert(CUE_FORM_PRESENT.to_string());
        }
    }
    if obs.modal_open {
        cues.insert(CUE_MODAL_OPEN.to_string());
    }
    PageContext {
        url: obs.url.clone(),
        present_cues: cues,
        interactive_count: obs.page_snapshot.iter().filter(|e| e.interactive).count(),
    }
}

#[derive(Debug, Clone)]
struct Episode {
    task_id: String,
    url: String,
    form: BTreeMap<String, String>,
    session: BTreeMap<String, String>,
    revealed: BTreeSet<String>,
    hidden: BTreeSet<String>,
    visited: Vec<String>,
    steps: usize,
    terminated: bool,
    answer: Option<String>,
    last_result: Option<String>,
}

impl Episode {
    fn lookup(&self, key: &str) -> Option<&String> {
        self.form.get(key).or_else(|| self.session.get(key))
    }

    fn state_view(&self) -> BTreeMap<String, String> {
        let mut view = self.session.clone();
        view.extend(self.form.iter().map(|(k, v)| (k.clone(), v.clone())));
        view
    }
}

/// One simulated browser tab over a site. Single-actor; create one per episode
/// to run episodes in parallel.
#[derive(Debug, Clone)]
pub struct WebEnv {
    spec: SiteSpec,
    version: u32,
    pages: BTreeMap<String, Page>,
    episode: Option<Episode>,
}

impl WebEnv {
    pub fn new(spec: SiteSpec) -> Result<Self> {
        spec.validate()?;
        let version = spec.active_version;
        let pages = spec.pages_at(version)?.into_iter().map(|p| (p.url.clone(), p)).collect();
        Ok(Self { spec, version, pages, episode: None })
    }

    pub fn site(&self) -> &SiteSpec {
        &self.spec
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn apply_drift(&mut self, version: u32) -> Result<()> {
        let pages = self.spec.pages_at(version)?;
        self.pages = pages.into_iter().map(|p| (p.url.clone(), p)).collect();
        self.version = version;
        Ok(())
    }

    pub fn template(&self, url: &str) -> Option<&Page> {
        self.pages.get(url)
    }

    pub fn reset(&mut self, task: &Task) -> Result<Observation> {
        if task.site_id != self.spec.site_id {
            return Err(Error::ForeignTask {
                task: task.task_id.clone(),
                task_site: task.site_id.clone(),
                env_site: self.spec.site_id.clone(),
            });
        }
        let page = self.pages.get(&task.start_url).ok_or_else(|| Error::UnknownUrl(task.start_url.clone()))?;
        self.episode = Some(Episode {
            task_id: task.task_id.clone(),
            url: task.start_url.clone(),
            form: page.state.clone(),
            session: BTreeMap::new(),
            revealed: BTreeSet::new(),
            hidden: BTreeSet::new(),
            visited: vec![task.start_url.clone()],
            steps: 0,
            terminated: false,
            answer: None,
            last_result: None,
        });
        self.observe()
    }

    fn episode(&self) -> Result<&Episode> {
        self.episode.as_ref().ok_or(Error::NoEpisode)
    }

    pub fn is_terminated(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.terminated)
    }

    pub fn steps_taken(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    pub fn answer(&self) -> Option<&str> {
        self.episode.as_ref().and_then(|e| e.answer.as_deref())
    }

    pub fn visited(&self) -> &[String] {
        self.episode.as_ref().map_or(&[], |e| e.visited.as_slice())
    }

    pub fn task_id(&self) -> Option<&str> {
        self.episode.as_ref().map(|e| e.task_id.as_str())
    }

    /// Ends the episode without an answer (step budget exhausted).
    pub fn terminate(&mut self) {
        if let Some(ep) = self.episode.as_mut() {
            ep.terminated = true;
        }
    }

    /// The page as currently rendered: drift applied, hidden elements removed.
    pub fn current_page(&self) -> Result<Page> {
        let ep = self.episode()?;
        Ok(self.render(ep))
    }

    fn render(&self, ep: &Episode) -> Page {
        let mut page = self.pages.get(&ep.url).cloned().unwrap_or_else(|| {
            Page::new(ep.url.clone(), NOT_FOUND_TITLE, ElementNode::new("body", "body"))
        });
        for key in &ep.revealed {
            if let Some(n) = page.root.find_mut(key) {
                n.hidden = false;
            }
        }
        for key in &ep.hidden {
            if let Some(n) = page.root.find_mut(key) {
                n.hidden = true;
            }
        }
        page.root = page.root.visible_only();
        page
    }

    pub fn observe(&self) -> Result<Observation> {
        let ep = self.episode()?;
        let page = self.render(ep);
        let mut snapshot = Vec::new();
        let mut modal_open = false;
        page.root.walk(&mut |node, ancestors| {
            let in_modal = node.modal || ancestors.iter().any(|a| a.modal);
            modal_open |= node.modal;
            if node.is_interactive() || node.text.is_some() {
                snapshot.push(ElementSnapshot::of(node, in_modal));
            }
        });
        Ok(Observation {
            site_id: self.spec.site_id.clone(),
            step_index: ep.steps,
            url: ep.url.clone(),
            title: page.title.clone(),
            page_snapshot: snapshot,
            state_view: ep.state_view(),
            last_action_result: ep.last_result.clone(),
            modal_open,
        })
    }

    fn navigate(&self, ep: &mut Episode, url: &str) -> &'static str {
        ep.url = url.to_string();
        ep.form = self.pages.get(url).map(|p| p.state.clone()).unwrap_or_default();
        ep.revealed.clear();
        ep.hidden.clear();
        ep.visited.push(url.to_string());
        if self.pages.contains_key(url) {
            notes::NAVIGATED
        } else {
            notes::NOT_FOUND
        }
    }

    pub fn step(&mut self, action: &Action) -> Result<Observation> {
        let mut ep = self.episode.take().ok_or(Error::NoEpisode)?;
        if ep.terminated {
            self.episode = Some(ep);
            return Err(Error::EpisodeTerminated);
        }
        if let Err(e) = action.check() {
            self.episode = Some(ep);
            return Err(e);
        }
        ep.steps += 1;
        let note = match action.kind {
            ActionKind::Answer => {
                ep.answer = action.payload.clone();
                ep.terminated = true;
                notes::ANSWERED.to_string()
            }
            ActionKind::Stop => {
                ep.terminated = true;
                notes::STOPPED.to_string()
            }
            ActionKind::Goto => {
                let url = action.payload.clone().unwrap_or_default();
                self.navigate(&mut ep, &url).to_string()
            }
            _ => self.interact(&mut ep, action),
        };
        ep.last_result = Some(note);
        self.episode = Some(ep);
        self.observe()
    }

    fn interact(&self, ep: &mut Episode, action: &Action) -> String {
        let page = self.render(ep);
        let target = action.target.as_ref().expect("checked").as_str();
        let mut located = None;
        page.root.walk(&mut |node, ancestors| {
            if node.key == target {
                located = Some((node.clone(), ancestors.iter().map(|a| (*a).clone()).collect::<Vec<_>>()));
            }
        });
        let Some((node, ancestors)) = located else {
            return notes::NO_EFFECT.to_string();
        };
        let mut modal_open = false;
        page.root.walk(&mut |n, _| modal_open |= n.modal);
        let inside_modal = node.modal || ancestors.iter().any(|a| a.modal);
        if modal_open && !inside_modal {
            return notes::BLOCKED.to_string();
        }
        let trigger = action.kind.trigger().expect("interactive kind");
        if let Some(note) = self.fire(ep, trigger, &node.key, action.payload.as_deref()) {
            return note;
        }
        match action.kind {
            ActionKind::Click => {
                if let Some(href) = node.attrs.get("href").filter(|_| node.tag == "a") {
                    return self.navigate(ep, href).to_string();
                }
                if node.is_text_field() {
                    return notes::FOCUSED.to_string();
                }
                let is_submit_button = node.attrs.get("type").map(String::as_str) == Some("submit");
                if is_submit_button {
                    if let Some(form) = ancestors.iter().rev().find(|a| a.tag == "form") {
                        if let Some(note) = self.fire(ep, TriggerKind::Submit, &form.key, None) {
                            return note;
                        }
                    }
                }
                notes::NO_EFFECT.to_string()
            }
            ActionKind::Type if node.is_text_field() => {
                ep.form.insert(node.key.clone(), action.payload.clone().unwrap_or_default());
                notes::VALUE_SET.to_string()
            }
            ActionKind::Select if node.tag == "select" => {
                let want = action.payload.as_deref().unwrap_or_default();
                match node.options().into_iter().find(|o| o.eq_ignore_ascii_case(want)) {
                    Some(opt) => {
                        ep.form.insert(node.key.clone(), opt.to_string());
                        notes::VALUE_SET.to_string()
                    }
                    None => notes::NO_EFFECT.to_string(),
                }
            }
            ActionKind::Submit => {
                if let Some(form) = ancestors.iter().rev().find(|a| a.tag == "form") {
                    if let Some(note) = self.fire(ep, TriggerKind::Submit, &form.key, None) {
                        return note;
                    }
                }
                notes::NO_EFFECT.to_string()
            }
            _ => notes::NO_EFFECT.to_string(),
        }
    }

    /// Applies the first matching scripted transition, if any.
    fn fire(&self, ep: &mut Episode, trigger: TriggerKind, key: &str, payload: Option<&str>) -> Option<String> {
        let t = self.spec.transitions.iter().find(|t| {
            t.action == trigger
                && t.element == key
                && glob_match(&t.url, &ep.url)
                && t.requires.iter().all(|(k, want)| requirement_holds(ep.lookup(k).map(String::as_str), want))
        })?;
        let resolved: Vec<Effect> = t.effects.iter().map(|e| fill_effect(e, ep, payload)).collect();
        let mut note = notes::STATE_CHANGED.to_string();
        for effect in resolved {
            match effect {
                Effect::Navigate { url } => note = self.navigate(ep, &url).to_string(),
                Effect::SetState { key, value } => {
                    ep.session.insert(key, value);
                }
                Effect::Increment { key } => {
                    let n: i64 = ep.session.get(&key).and_then(|v| v.parse().ok()).unwrap_or(0);
                    ep.session.insert(key, (n + 1).to_string());
                }
                Effect::Reveal { element } | Effect::OpenModal { element } => {
                    ep.hidden.remove(&element);
                    ep.revealed.insert(element);
                }
                Effect::Hide { element } => {
                    ep.revealed.remove(&element);
                    ep.hidden.insert(element);
                }
                Effect::Note { text } => note = text,
            }
        }
        Some(note)
    }

    /// y: whether the task's success predicate holds on the terminal state.
    pub fn evaluate_task(&self, task: &Task) -> Result<bool> {
        let ep = self.episode()?;
        if !ep.terminated {
            return Err(Error::EpisodeNotTerminated);
        }
        let page = self.render(ep);
        let state = ep.state_view();
        let lookup = |key: &str| page.element(key).and_then(|n| n.text.clone());
        let fin = FinalState {
            url: &ep.url,
            visited: &ep.visited,
            state: &state,
            answer: ep.answer.as_deref(),
            element_text: &lookup,
        };
        Ok(task.success.holds(&fin))
    }
}

fn requirement_holds(value: Option<&str>, want: &str) -> bool {
    let value = value.unwrap_or("").trim();
    match want {
        "*" => !value.is_empty(),
        "" => value.is_empty(),
        w => value.eq_ignore_ascii_case(w),
    }
}

fn url_encode(v: &str) -> String {
    v.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join("+")
}

fn fill(template: &str, ep: &Episode, payload: Option<&str>) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let Some(end) = after.find('}') else {
            out.push_str(&rest[start..]);
            return out;
        };
        let token = &after[..end];
        let value = match token.split_once(':') {
            Some(("form" | "state", k)) => ep.lookup(k).cloned().unwrap_or_default(),
            Some(("query", k)) => url_encode(ep.lookup(k).map(String::as_str).unwrap_or("")),
            None if token == "url" => ep.url.clone(),
            None if token == "payload" => payload.unwrap_or("").to_string(),
            _ => format!("{{{token}}}"),
        };
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    out
}

fn fill_effect(e: &Effect, ep: &Episode, payload: Option<&str>) -> Effect {
    match e {
        Effect::Navigate { url } => Effect::Navigate { url: fill(url, ep, payload) },
        Effect::SetState { key, value } => Effect::SetState { key: key.clone(), value: fill(value, ep, payload) },
        other => other.clone(),
    }
}

pub fn load_site(path: impl AsRef<Path>) -> Result<WebEnv> {
    WebEnv::new(SiteSpec::load(path)?)
}
