//! Shared helpers for integration tests: an independent selector oracle and
//! random page and selector generators.
#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use webskill_core::sim::{ElementNode, Page};

pub fn fixture_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/harness.toml")
}

/// Test-local selector form, rendered to the engine's syntax.
#[derive(Debug, Clone)]
pub enum Sel {
    Text(String),
    Label(String),
    /// Descendant chain of compounds, outermost first.
    Path(Vec<Part>),
}

#[derive(Debug, Clone, Default)]
pub struct Part {
    pub tag: Option<String>,
    pub id: Option<String>,
    pub classes: Vec<String>,
    pub attrs: Vec<(String, String)>,
}

impl Part {
    fn render(&self) -> String {
        let mut s = self.tag.clone().unwrap_or_default();
        if let Some(i) = &self.id {
            s.push('#');
            s.push_str(i);
        }
        for c in &self.classes {
            s.push('.');
            s.push_str(c);
        }
        for (n, v) in &self.attrs {
            s.push_str(&format!("[{n}=\"{v}\"]"));
        }
        s
    }

    fn admits(&self, n: &ElementNode) -> bool {
        if let Some(t) = &self.tag {
            if !n.tag.eq_ignore_ascii_case(t) {
                return false;
            }
        }
        if let Some(i) = &self.id {
            if n.id.as_ref() != Some(i) {
                return false;
            }
        }
        for c in &self.classes {
            if !n.classes.iter().any(|x| x == c) {
                return false;
            }
        }
        for (name, v) in &self.attrs {
            let actual = if name == "id" { n.id.as_ref() } else { n.attrs.get(name) };
            if actual != Some(v) {
                return false;
            }
        }
        true
    }
}

impl Sel {
    pub fn render(&self) -> String {
        match self {
            Sel::Text(t) => format!("text=\"{t}\""),
            Sel::Label(t) => format!("label~\"{t}\""),
            Sel::Path(parts) => parts.iter().map(Part::render).collect::<Vec<_>>().join(" "),
        }
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Every node with its ancestor path (outermost first), pre-order, via an
/// explicit stack.
pub fn flatten(root: &ElementNode) -> Vec<(&ElementNode, Vec<&ElementNode>)> {
    let mut out = Vec::new();
    let mut stack: Vec<(&ElementNode, Vec<&ElementNode>)> = vec![(root, vec![])];
    while let Some((node, path)) = stack.pop() {
        let mut child_path = path.clone();
        child_path.push(node);
        for c in node.children.iter().rev() {
            stack.push((c, child_path.clone()));
        }
        out.push((node, path));
    }
    out
}

fn path_admits(parts: &[Part], node: &ElementNode, ancestors: &[&ElementNode]) -> bool {
    let (last, rest) = parts.split_last().expect("non-empty path");
    if !last.admits(node) {
        return false;
    }
    // greedy innermost-first assignment of the remaining parts to ancestors
    let mut need = rest.iter().rev().peekable();
    for a in ancestors.iter().rev() {
        match need.peek() {
            Some(p) if p.admits(a) => {
                need.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    need.peek().is_none()
}

/// Keys matched by `sel`, in document order, by brute force.
pub fn oracle_query(sel: &Sel, page: &Page) -> Vec<String> {
    flatten(&page.root)
        .into_iter()
        .filter(|(n, anc)| match sel {
            Sel::Text(t) => n.text.as_deref().is_some_and(|x| squash(x) == squash(t)),
            Sel::Label(t) => n.label.as_deref().is_some_and(|x| squash(x) == squash(t)),
            Sel::Path(parts) => path_admits(parts, n, anc),
        })
        .map(|(n, _)| n.key.clone())
        .collect()
}

/// (index, first key) of the first chain entry with a match.
pub fn oracle_chain(chain: &[Sel], page: &Page) -> Option<(usize, String)> {
    for (i, s) in chain.iter().enumerate() {
        if let Some(k) = oracle_query(s, page).into_iter().next() {
            return Some((i, k));
        }
    }
    None
}

const TAGS: &[&str] = &["div", "span", "a", "button", "input", "ul", "li"];
const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta"];

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(WORDS).prop_map(str::to_string)
}

fn node_strategy() -> impl Strategy<Value = ElementNode> {
    let leaf = (
        prop::sample::select(TAGS),
        prop::option::of(word()),
        prop::collection::vec(word(), 0..3),
        prop::option::of(word()),
        prop::option::of(word()),
        prop::option::of(word()),
    )
        .prop_map(|(tag, id, classes, name, text, label)| {
            let mut n = ElementNode::new("", tag);
            n.id = id;
            n.classes = classes;
            if let Some(v) = name {
                n.attrs.insert("name".into(), v);
            }
            n.text = text.map(|t| format!(" {t}  item "));
            n.label = label;
            n
        });
    leaf.prop_recursive(4, 40, 4, |inner| {
        (inner.clone(), prop::collection::vec(inner, 0..4)).prop_map(|(mut n, kids)| {
            n.children = kids;
            n
        })
    })
}

fn assign_keys(n: &mut ElementNode, next: &mut usize) {
    n.key = format!("n{next}");
    *next += 1;
    for c in &mut n.children {
        assign_keys(c, next);
    }
}

pub fn page_strategy() -> impl Strategy<Value = Page> {
    prop::collection::vec(node_strategy(), 1..4).prop_map(|kids| {
        let mut root = ElementNode::new("", "body");
        root.children = kids;
        let mut next = 0;
        assign_keys(&mut root, &mut next);
        Page::new("/", "Random", root)
    })
}

fn part_strategy() -> impl Strategy<Value = Part> {
    (
        prop::option::of(prop::sample::select(TAGS).prop_map(str::to_string)),
        prop::option::of(word()),
        prop::collection::vec(word(), 0..2),
        prop::option::of((prop::sample::select(&["name", "id"][..]).prop_map(str::to_string), word())),
    )
        .prop_map(|(tag, id, classes, attr)| Part { tag, id, classes, attrs: attr.into_iter().collect() })
        .prop_filter("empty compound", |p| {
            p.tag.is_some() || p.id.is_some() || !p.classes.is_empty() || !p.attrs.is_empty()
        })
}

pub fn sel_strategy() -> impl Strategy<Value = Sel> {
    prop_oneof![
        1 => word().prop_map(|w| Sel::Text(format!("{w} item"))),
        1 => word().prop_map(Sel::Label),
        6 => prop::collection::vec(part_strategy(), 1..4).prop_map(Sel::Path),
    ]
}
