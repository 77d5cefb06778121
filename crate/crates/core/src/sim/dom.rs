//! Element trees and pages of the simulated web.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Stable handle of an element inside one page.
///
/// Keys are never exposed to selectors; they are what scripted transitions,
/// drift rules and recorded actions refer to, so they survive UI drift.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementRef(pub String);

impl ElementRef {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ElementRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementNode {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ElementNode>,
    /// Defaults from the tag when absent (links, buttons and form controls).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactive: Option<bool>,
    /// Hidden until revealed by a transition.
    #[serde(default, skip_serializing_if = "is_false")]
    pub hidden: bool,
    /// A visible modal intercepts clicks on everything outside its subtree.
    #[serde(default, skip_serializing_if = "is_false")]
    pub modal: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ElementNode {
    pub fn new(key: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            id: None,
            tag: tag.into(),
            classes: Vec::new(),
            attrs: BTreeMap::new(),
            text: None,
            label: None,
            children: Vec::new(),
            interactive: None,
            hidden: false,
            modal: false,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.classes.push(class.into());
        self
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.insert(name.into(), value.into());
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_child(mut self, child: ElementNode) -> Self {
        self.children.push(child);
        self
    }

    pub fn key(&self) -> ElementRef {
        ElementRef(self.key.clone())
    }

    pub fn is_interactive(&self) -> bool {
        self.interactive.unwrap_or_else(|| {
            matches!(
                self.tag.as_str(),
                "a" | "button" | "input" | "select" | "textarea" | "form"
            )
        })
    }

    pub fn is_text_field(&self) -> bool {
        match self.tag.as_str() {
            "textarea" => true,
            "input" => !matches!(
                self.attrs.get("type").map(String::as_str),
                Some("submit" | "button" | "checkbox" | "radio")
            ),
            _ => false,
        }
    }

    /// Option texts of a `select` element.
    pub fn options(&self) -> Vec<&str> {
        self.children
            .iter()
            .filter(|c| c.tag == "option")
            .filter_map(|c| c.text.as_deref())
            .collect()
    }

    /// Pre-order traversal; the visitor receives the node and its ancestors.
    pub fn walk<'a, F>(&'a self, f: &mut F)
    where
        F: FnMut(&'a ElementNode, &[&'a ElementNode]),
    {
        let mut stack: Vec<&'a ElementNode> = Vec::new();
        walk_inner(self, &mut stack, f);
    }

    pub fn find(&self, key: &str) -> Option<&ElementNode> {
        if self.key == key {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(key))
    }

    pub fn find_mut(&mut self, key: &str) -> Option<&mut ElementNode> {
        if self.key == key {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(key))
    }

    /// Copy of this subtree with hidden nodes removed.
    pub fn visible_only(&self) -> ElementNode {
        let mut out = self.clone();
        out.children = self
            .children
            .iter()
            .filter(|c| !c.hidden)
            .map(ElementNode::visible_only)
            .collect();
        out
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(ElementNode::count).sum::<usize>()
    }
}

fn walk_inner<'a, F>(node: &'a ElementNode, stack: &mut Vec<&'a ElementNode>, f: &mut F)
where
    F: FnMut(&'a ElementNode, &[&'a ElementNode]),
{
    f(node, stack);
    stack.push(node);
    for child in &node.children {
        walk_inner(child, stack, f);
    }
    stack.pop();
}

/// Collapse whitespace runs and trim.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub url: String,
    pub title: String,
    pub root: ElementNode,
    /// Initial form values and page flags.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub state: BTreeMap<String, String>,
}

impl Page {
    pub fn new(url: impl Into<String>, title: impl Into<String>, root: ElementNode) -> Self {
        Self {
            url: url.into(),
            title: title.into(),
            root,
            state: BTreeMap::new(),
        }
    }

    pub fn element(&self, key: &str) -> Option<&ElementNode> {
        self.root.find(key)
    }

    /// All element keys in document (pre-) order.
    pub fn keys(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.root.walk(&mut |n, _| out.push(n.key.clone()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_is_preorder() {
        let root = ElementNode::new("r", "body")
            .with_child(ElementNode::new("a", "div").with_child(ElementNode::new("b", "span")))
            .with_child(ElementNode::new("c", "div"));
        let page = Page::new("/", "t", root);
        assert_eq!(page.keys(), vec!["r", "a", "b", "c"]);
    }

    #[test]
    fn interactivity_defaults_from_tag() {
        assert!(ElementNode::new("x", "button").is_interactive());
        assert!(!ElementNode::new("x", "span").is_interactive());
        let mut span = ElementNode::new("x", "span");
        span.interactive = Some(true);
        assert!(span.is_interactive());
    }

    #[test]
    fn visible_only_prunes_hidden_subtrees() {
        let mut hidden = ElementNode::new("h", "div").with_child(ElementNode::new("hc", "span"));
        hidden.hidden = true;
        let root = ElementNode::new("r", "body").with_child(hidden);
        assert_eq!(root.visible_only().count(), 1);
    }
}
