//! Text action grammar used by language-model policies and stored gold solutions:
//! `click(<sel>)`, `type(<sel>, "<t>")`, `select(<sel>, "<o>")`, `submit(<sel>)`,
//! `goto("<url>")`, `answer("<t>")`, `stop()`.

use std::fmt;

use crate::selector::{parse_selector, query};
use crate::sim::{Action, ActionKind, ElementRef, Page};

/// Target prefix for selectors that matched nothing; the environment treats
/// such actions as no-ops.
pub const UNRESOLVED_PREFIX: &str = "unresolved:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarAction {
    pub kind: ActionKind,
    pub selector: Option<String>,
    pub text: Option<String>,
}

fn kind_of(name: &str) -> Option<ActionKind> {
    Some(match name {
        "click" => ActionKind::Click,
        "type" => ActionKind::Type,
        "select" => ActionKind::Select,
        "submit" => ActionKind::Submit,
        "goto" => ActionKind::Goto,
        "answer" => ActionKind::Answer,
        "stop" => ActionKind::Stop,
        _ => return None,
    })
}

/// Byte offset of the first comma outside quotes and brackets.
fn top_level_comma(s: &str) -> Option<usize> {
    let mut quote = false;
    let mut escaped = false;
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quote => escaped = true,
            '"' => quote = !quote,
            '[' | '(' if !quote => depth += 1,
            ']' | ')' if !quote => depth -= 1,
            ',' if !quote && depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

fn quoted(s: &str) -> Result<String, String> {
    let s = s.trim();
    let inner = s
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .filter(|_| s.len() >= 2)
        .ok_or_else(|| format!("expected a quoted string, found {s:?}"))?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(chars.next().ok_or("dangling escape")?),
            '"' => return Err("unescaped quote inside string".into()),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn selector_arg(s: &str) -> Result<String, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("missing selector".into());
    }
    parse_selector(s).map_err(|e| format!("bad selector {s:?}: {e}"))?;
    Ok(s.to_string())
}

/// Parses the first non-empty line of `text`; surrounding backticks are ignored.
pub fn parse_action(text: &str) -> Result<GrammarAction, String> {
    let line = text
        .lines()
        .map(|l| l.trim().trim_matches('`').trim())
        .find(|l| !l.is_empty())
        .ok_or("empty action text")?;
    let open = line.find('(').ok_or_else(|| format!("no argument list in {line:?}"))?;
    let name = line[..open].trim();
    let kind = kind_of(name).ok_or_else(|| format!("unknown action {name:?}"))?;
    let inner = line[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("unterminated argument list in {line:?}"))?;
    let (selector, text) = match kind {
        ActionKind::Stop if inner.trim().is_empty() => (None, None),
        ActionKind::Stop => return Err("stop() takes no arguments".into()),
        ActionKind::Click | ActionKind::Submit => (Some(selector_arg(inner)?), None),
        ActionKind::Type | ActionKind::Select => {
            let comma = top_level_comma(inner).ok_or_else(|| format!("{name} needs a selector and a string"))?;
            (Some(selector_arg(&inner[..comma])?), Some(quoted(&inner[comma + 1..])?))
        }
        ActionKind::Goto | ActionKind::Answer => (None, Some(quoted(inner)?)),
    };
    Ok(GrammarAction { kind, selector, text })
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl fmt::Display for GrammarAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        match (&self.selector, &self.text) {
            (Some(s), Some(t)) => write!(f, "{s}, \"{}\"", escape(t))?,
            (Some(s), None) => write!(f, "{s}")?,
            (None, Some(t)) => write!(f, "\"{}\"", escape(t))?,
            (None, None) => {}
        }
        f.write_str(")")
    }
}

impl GrammarAction {
    /// Grounds the selector on `page` (first match in document order).
    pub fn resolve(&self, page: &Page) -> Action {
        let target = self.selector.as_ref().map(|src| {
            parse_selector(src)
                .ok()
                .and_then(|sel| query(&sel, page).into_iter().next())
                .unwrap_or_else(|| ElementRef::new(format!("{UNRESOLVED_PREFIX}{src}")))
        });
        Action {
            kind: self.kind,
            target,
            payload: self.text.clone(),
        }
    }
}
