//! Locator grammar used by interaction-skill templates.
//!
//! Supported forms: `#id`, `.class`, `tag`, `[attr=value]`, `text="..."`,
//! `label~"..."`, compounds such as `button.primary[type=submit]`, and
//! descendant combination with a single space (`form.checkout input[name=zip]`).
//! There are no pseudo-classes and no sibling combinators.
//!
//! Matches are reported in document order (pre-order traversal).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::sim::dom::{normalize_ws, ElementNode, ElementRef, Page};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectorError {
    #[error("selector syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("selector {index} in chain is invalid: {source}")]
    Chain {
        index: usize,
        #[source]
        source: Box<SelectorError>,
    },
}

fn syntax(pos: usize, msg: impl Into<String>) -> SelectorError {
    SelectorError::Syntax {
        pos,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Compound {
    pub tag: Option<String>,
    pub id: Option<String>,
    pub classes: Vec<String>,
    pub attrs: Vec<(String, String)>,
}

impl Compound {
    fn parts(&self) -> usize {
        self.tag.is_some() as usize + self.id.is_some() as usize + self.classes.len() + self.attrs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    ById(String),
    ByClass(String),
    ByTag(String),
    ByAttr(String, String),
    ByText(String),
    ByLabel(String),
    Compound(Compound),
    Descendant(Box<Selector>, Box<Selector>),
}

impl Selector {
    /// Collapse a one-part compound into the matching simple variant.
    fn from_compound(c: Compound) -> Selector {
        if c.parts() != 1 {
            return Selector::Compound(c);
        }
        if let Some(t) = c.tag {
            Selector::ByTag(t)
        } else if let Some(i) = c.id {
            Selector::ById(i)
        } else if let Some(cl) = c.classes.into_iter().next() {
            Selector::ByClass(cl)
        } else {
            let (n, v) = c.attrs.into_iter().next().expect("one part");
            Selector::ByAttr(n, v)
        }
    }

    /// Does `node` satisfy this selector, given its ancestors (outermost first)?
    pub fn matches(&self, node: &ElementNode, ancestors: &[&ElementNode]) -> bool {
        match self {
            Selector::Descendant(anc, desc) => {
                desc.matches(node, ancestors)
                    && (0..ancestors.len()).any(|i| anc.matches(ancestors[i], &ancestors[..i]))
            }
            other => other.matches_simple(node),
        }
    }

    fn matches_simple(&self, node: &ElementNode) -> bool {
        match self {
            Selector::ById(id) => node.id.as_deref() == Some(id.as_str()),
            Selector::ByClass(c) => node.classes.iter().any(|x| x == c),
            Selector::ByTag(t) => node.tag.eq_ignore_ascii_case(t),
            Selector::ByAttr(n, v) => attr_of(node, n) == Some(v.as_str()),
            Selector::ByText(t) => node
                .text
                .as_deref()
                .is_some_and(|x| normalize_ws(x) == normalize_ws(t)),
            Selector::ByLabel(t) => node
                .label
                .as_deref()
                .is_some_and(|x| normalize_ws(x) == normalize_ws(t)),
            Selector::Compound(c) => {
                c.tag.as_ref().map_or(true, |t| node.tag.eq_ignore_ascii_case(t))
                    && c.id.as_ref().map_or(true, |i| node.id.as_deref() == Some(i.as_str()))
                    && c.classes.iter().all(|cl| node.classes.contains(cl))
                    && c.attrs.iter().all(|(n, v)| attr_of(node, n) == Some(v.as_str()))
            }
            Selector::Descendant(..) => unreachable!("handled in matches"),
        }
    }

    /// Names of `{param}` placeholders appearing in string payloads.
    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_value(&mut |v| out.extend(placeholders_in(v)));
        out
    }

    fn for_each_value(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Selector::ById(v) | Selector::ByClass(v) | Selector::ByTag(v) => f(v),
            Selector::ByAttr(_, v) | Selector::ByText(v) | Selector::ByLabel(v) => f(v),
            Selector::Compound(c) => {
                c.attrs.iter().for_each(|(_, v)| f(v));
            }
            Selector::Descendant(a, d) => {
                a.for_each_value(f);
                d.for_each_value(f);
            }
        }
    }

    /// Fill `{param}` placeholders in text, label and attribute values.
    pub fn substitute(&self, args: &BTreeMap<String, String>) -> Selector {
        let sub = |v: &String| fill_placeholders(v, args);
        match self {
            Selector::ByAttr(n, v) => Selector::ByAttr(n.clone(), sub(v)),
            Selector::ByText(v) => Selector::ByText(sub(v)),
            Selector::ByLabel(v) => Selector::ByLabel(sub(v)),
            Selector::Compound(c) => Selector::Compound(Compound {
                attrs: c.attrs.iter().map(|(n, v)| (n.clone(), sub(v))).collect(),
                ..c.clone()
            }),
            Selector::Descendant(a, d) => {
                Selector::Descendant(Box::new(a.substitute(args)), Box::new(d.substitute(args)))
            }
            other => other.clone(),
        }
    }
}

fn attr_of<'a>(node: &'a ElementNode, name: &str) -> Option<&'a str> {
    if name == "id" {
        return node.id.as_deref();
    }
    node.attrs.get(name).map(String::as_str)
}

/// `{name}` spans inside a value.
pub fn placeholders_in(value: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = value;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) if end > 0 && after[..end].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                out.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

pub fn fill_placeholders(value: &str, args: &BTreeMap<String, String>) -> String {
    let mut out = value.to_string();
    for name in placeholders_in(value) {
        if let Some(v) = args.get(&name) {
            out = out.replace(&format!("{{{name}}}"), v);
        }
    }
    out
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

fn is_bare_value_char(c: char) -> bool {
    is_ident_char(c) || matches!(c, '.' | ':' | '/')
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::ById(i) => write!(f, "#{i}"),
            Selector::ByClass(c) => write!(f, ".{c}"),
            Selector::ByTag(t) => f.write_str(t),
            Selector::ByAttr(n, v) => write_attr(f, n, v),
            Selector::ByText(t) => write!(f, "text={}", quote(t)),
            Selector::ByLabel(t) => write!(f, "label~{}", quote(t)),
            Selector::Compound(c) => {
                if let Some(t) = &c.tag {
                    f.write_str(t)?;
                }
                if let Some(i) = &c.id {
                    write!(f, "#{i}")?;
                }
                for cl in &c.classes {
                    write!(f, ".{cl}")?;
                }
                for (n, v) in &c.attrs {
                    write_attr(f, n, v)?;
                }
                Ok(())
            }
            Selector::Descendant(a, d) => write!(f, "{a} {d}"),
        }
    }
}

fn write_attr(f: &mut fmt::Formatter<'_>, n: &str, v: &str) -> fmt::Result {
    if !v.is_empty() && v.chars().all(is_bare_value_char) {
        write!(f, "[{n}={v}]")
    } else {
        write!(f, "[{n}={}]", quote(v))
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    /// Byte offset of the cursor.
    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.src.len(), |&(i, _)| i)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SelectorError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected '{c}'")))
        }
    }

    fn starts_with(&self, lit: &str) -> bool {
        self.src[self.offset()..].starts_with(lit)
    }

    fn ident(&mut self, what: &str) -> Result<String, SelectorError> {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(syntax(self.offset(), format!("expected {what}")));
        }
        Ok(self.chars[start..self.pos].iter().map(|&(_, c)| c).collect())
    }

    fn quoted(&mut self) -> Result<String, SelectorError> {
        let open = self.offset();
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(syntax(open, "unterminated string")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                        None => return Err(syntax(open, "unterminated string")),
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn attr(&mut self) -> Result<(String, String), SelectorError> {
        self.expect('[')?;
        let name = self.ident("attribute name")?;
        self.expect('=')?;
        let value = if self.peek() == Some('"') {
            self.quoted()?
        } else {
            let start = self.pos;
            while self.peek().is_some_and(is_bare_value_char) {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(syntax(self.offset(), "expected attribute value"));
            }
            self.chars[start..self.pos].iter().map(|&(_, c)| c).collect()
        };
        self.expect(']')?;
        Ok((name, value))
    }

    fn compound(&mut self) -> Result<Selector, SelectorError> {
        if self.starts_with("text=") {
            self.pos += "text=".len();
            return Ok(Selector::ByText(self.quoted()?));
        }
        if self.starts_with("label~") {
            self.pos += "label~".len();
            return Ok(Selector::ByLabel(self.quoted()?));
        }
        let mut c = Compound::default();
        if self.peek().is_some_and(is_ident_char) {
            c.tag = Some(self.ident("tag")?);
        }
        loop {
            match self.peek() {
                Some('#') => {
                    let at = self.offset();
                    self.pos += 1;
                    if c.id.is_some() {
                        return Err(syntax(at, "duplicate id in compound"));
                    }
                    c.id = Some(self.ident("id")?);
                }
                Some('.') => {
                    self.pos += 1;
                    c.classes.push(self.ident("class name")?);
                }
                Some('[') => c.attrs.push(self.attr()?),
                _ => break,
            }
        }
        if c.parts() == 0 {
            return Err(syntax(self.offset(), "expected selector"));
        }
        Ok(Selector::from_compound(c))
    }

    fn selector(&mut self) -> Result<Selector, SelectorError> {
        let mut sel = self.compound()?;
        while self.peek().is_some() {
            if !self.eat(' ') {
                return Err(syntax(self.offset(), "unexpected character"));
            }
            if self.peek() == Some(' ') {
                return Err(syntax(self.offset(), "descendant combinator is a single space"));
            }
            let rhs = self.compound()?;
            sel = Selector::Descendant(Box::new(sel), Box::new(rhs));
        }
        Ok(sel)
    }
}

pub fn parse_selector(source: &str) -> Result<Selector, SelectorError> {
    if source.is_empty() {
        return Err(syntax(0, "empty selector"));
    }
    Parser::new(source).selector()
}

impl std::str::FromStr for Selector {
    type Err = SelectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_selector(s)
    }
}

/// All elements of `page` matching `selector`, in document order.
pub fn query(selector: &Selector, page: &Page) -> Vec<ElementRef> {
    query_node(selector, &page.root)
}

pub fn query_node(selector: &Selector, root: &ElementNode) -> Vec<ElementRef> {
    let mut out = Vec::new();
    root.walk(&mut |node, ancestors| {
        if selector.matches(node, ancestors) {
            out.push(node.key());
        }
    });
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub element: ElementRef,
    pub index: usize,
}

/// First selector in the chain with at least one match, together with its
/// first match in document order.
pub fn resolve_chain<S: AsRef<str>>(chain: &[S], page: &Page) -> Result<Option<Resolved>, SelectorError> {
    let parsed = parse_chain(chain)?;
    Ok(resolve_parsed(&parsed, page))
}

pub fn parse_chain<S: AsRef<str>>(chain: &[S]) -> Result<Vec<Selector>, SelectorError> {
    chain
        .iter()
        .enumerate()
        .map(|(index, s)| {
            parse_selector(s.as_ref()).map_err(|e| SelectorError::Chain {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn resolve_parsed(chain: &[Selector], page: &Page) -> Option<Resolved> {
    chain.iter().enumerate().find_map(|(index, sel)| {
        query(sel, page)
            .into_iter()
            .next()
            .map(|element| Resolved { element, index })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Selector {
        parse_selector(s).unwrap()
    }

    fn fixture() -> Page {
        let root = ElementNode::new("body", "body")
            .with_child(
                ElementNode::new("form", "form")
                    .with_class("checkout")
                    .with_child(ElementNode::new("zip", "input").with_attr("name", "zip").with_label("Zip code"))
                    .with_child(
                        ElementNode::new("go", "button")
                            .with_id("buy-now")
                            .with_class("primary")
                            .with_attr("type", "submit")
                            .with_text("Buy  now"),
                    ),
            )
            .with_child(ElementNode::new("other", "input").with_attr("name", "zip"));
        Page::new("/checkout", "Checkout", root)
    }

    #[test]
    fn parses_grammar_examples() {
        assert_eq!(p("#buy-now"), Selector::ById("buy-now".into()));
        assert_eq!(p("text=\"Add to cart\""), Selector::ByText("Add to cart".into()));
        assert_eq!(
            p("form.checkout input[name=zip]"),
            Selector::Descendant(
                Box::new(Selector::Compound(Compound {
                    tag: Some("form".into()),
                    classes: vec!["checkout".into()],
                    ..Default::default()
                })),
                Box::new(Selector::Compound(Compound {
                    tag: Some("input".into()),
                    attrs: vec![("name".into(), "zip".into())],
                    ..Default::default()
                })),
            )
        );
        assert_eq!(p("label~\"Zip code\""), Selector::ByLabel("Zip code".into()));
        assert_eq!(p("[aria-label=\"Add to cart\"]"), Selector::ByAttr("aria-label".into(), "Add to cart".into()));
        assert_eq!(p(".primary"), Selector::ByClass("primary".into()));
        assert_eq!(p("button"), Selector::ByTag("button".into()));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_selector("button[type=").unwrap_err();
        assert_eq!(err, syntax(12, "expected attribute value"));
        assert!(matches!(parse_selector("text=\"abc"), Err(SelectorError::Syntax { pos: 5, .. })));
        assert!(matches!(parse_selector("a  b"), Err(SelectorError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_selector("a>b"), Err(SelectorError::Syntax { pos: 1, .. })));
        assert!(parse_selector("").is_err());
        assert!(parse_selector("#").is_err());
    }

    #[test]
    fn query_examples() {
        let page = fixture();
        assert_eq!(query(&p("#buy-now"), &page), vec![ElementRef::new("go")]);
        assert!(query(&p(".absent"), &page).is_empty());
        assert_eq!(query(&p("[name=zip]"), &page), vec![ElementRef::new("zip"), ElementRef::new("other")]);
        assert_eq!(query(&p("form.checkout input[name=zip]"), &page), vec![ElementRef::new("zip")]);
        assert_eq!(query(&p("text=\"Buy now\""), &page), vec![ElementRef::new("go")]);
        assert_eq!(query(&p("label~\"Zip code\""), &page), vec![ElementRef::new("zip")]);
        assert_eq!(query(&p("[id=buy-now]"), &page), vec![ElementRef::new("go")]);
    }

    #[test]
    fn chain_uses_first_valid_selector() {
        let page = fixture();
        let r = resolve_chain(&["#old-id", "text=\"Buy now\""], &page).unwrap().unwrap();
        assert_eq!(r, Resolved { element: ElementRef::new("go"), index: 1 });
        let r = resolve_chain(&["#buy-now", ".nothing"], &page).unwrap().unwrap();
        assert_eq!(r.index, 0);
        assert_eq!(resolve_chain(&["#x", ".y"], &page).unwrap(), None);
        let err = resolve_chain(&["#x", "[bad"], &page).unwrap_err();
        assert!(matches!(err, SelectorError::Chain { index: 1, .. }));
    }

    #[test]
    fn placeholders_are_substituted() {
        let sel = p("text=\"{topic}\"");
        assert_eq!(sel.placeholders().into_iter().collect::<Vec<_>>(), vec!["topic".to_string()]);
        let args = BTreeMap::from([("topic".to_string(), "Tea".to_string())]);
        assert_eq!(sel.substitute(&args), Selector::ByText("Tea".into()));
    }

    #[test]
    fn printing_quotes_when_needed() {
        assert_eq!(p("[aria-label=\"a \\\"b\\\"\"]").to_string(), "[aria-label=\"a \\\"b\\\"\"]");
        assert_eq!(p("input[name=zip]").to_string(), "input[name=zip]");
        assert_eq!(p("a.b  c".replace("  ", " ").as_str()).to_string(), "a.b c");
    }
}
