//! Surface syntax for rendering a statement as one source line and parsing it back.
//!
//! A rendered line looks like (Rust profile):
//!
//! ```text
//!     eprintln!("RELOG DEBUG #2 acc={:?}", acc); /*RELOG:plan-7:2:a14*/
//! ```
//!
//! The trailing comment is the marker: plan id, statement index, position
//! (`b`/`a`) and original anchor line. Everything needed to rebuild the
//! statement is recoverable from the line itself.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_plan_id, LoggingStatement, ModelError, Position, Severity, SLOT};

/// Tag opening every marker comment.
pub const MARKER_TAG: &str = "RELOG:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("variable {0:?} does not survive argument splitting")]
    AmbiguousVariable(String),
    #[error("text {0:?} contains the comment terminator")]
    CommentTerminator(String),
    #[error("line has no parseable marker")]
    NoMarker,
    #[error("marker line does not match the call pattern: {0}")]
    CallMismatch(String),
}

/// Language-specific surface syntax of a logging call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderProfile {
    pub name: String,
    /// Call pattern with an `{args}` hole. `{level}` and `{LEVEL}` expand to
    /// the lower/upper-case severity.
    pub call_pattern: String,
    /// Per-severity replacement for `call_pattern`.
    #[serde(default)]
    pub call_overrides: BTreeMap<Severity, String>,
    /// Placeholder the target formatter expects in place of a `{}` slot.
    pub placeholder: String,
    /// Double literal braces (`{{`, `}}`), as Rust and Python format strings need.
    #[serde(default)]
    pub escape_braces: bool,
    pub comment_open: String,
    pub comment_close: String,
    /// Prefix of every emitted runtime log line.
    pub log_marker: String,
    /// Regex (interpreted by callers with a regex engine) matching the first
    /// line of a function/method and capturing its name as `name`.
    pub method_pattern: String,
}

impl RenderProfile {
    /// Profile for single-file Rust programs logging through `eprintln!`.
    pub fn rust() -> Self {
        Self {
            name: "rust".into(),
            call_pattern: "eprintln!({args});".into(),
            call_overrides: BTreeMap::new(),
            placeholder: "{:?}".into(),
            escape_braces: true,
            comment_open: "/*".into(),
            comment_close: "*/".into(),
            log_marker: "RELOG".into(),
            method_pattern: r"^\s*(?:pub(?:\([^)]*\))?\s+)?(?:const\s+)?(?:unsafe\s+)?fn\s+(?P<name>[A-Za-z_][A-Za-z0-9_]*)".into(),
        }
    }

    /// Profile for Java sources logging through an slf4j-style `LOG` field.
    pub fn java() -> Self {
        Self {
            name: "java".into(),
            call_pattern: "System.err.println(String.format({args}));".into(),
            call_overrides: BTreeMap::new(),
            placeholder: "%s".into(),
            escape_braces: false,
            comment_open: "/*".into(),
            comment_close: "*/".into(),
            log_marker: "RELOG".into(),
            method_pattern: r"^\s*(?:(?:public|private|protected|static|final|synchronized)\s+)*[\w<>\[\],\s]+\s+(?P<name>[A-Za-z_]\w*)\s*\([^;]*$".into(),
        }
    }

    fn pattern_for(&self, severity: Severity) -> &str {
        self.call_overrides
            .get(&severity)
            .map(String::as_str)
            .unwrap_or(&self.call_pattern)
    }

    fn call_affixes(&self, severity: Severity) -> (String, String) {
        let pattern = self.pattern_for(severity);
        let (pre, post) = pattern.split_once("{args}").unwrap_or((pattern, ""));
        let expand = |s: &str| {
            s.replace("{level}", severity.as_str())
                .replace("{LEVEL}", severity.tag())
        };
        (expand(pre), expand(post))
    }

    /// Text emitted at runtime before the statement's template.
    pub fn message_prefix(&self, severity: Severity, index: usize) -> String {
        format!("{} {} #{} ", self.log_marker, severity.tag(), index)
    }

    fn marker(&self, plan_id: &str, index: usize, stmt: &LoggingStatement) -> String {
        let pos = match stmt.position {
            Position::Before => 'b',
            Position::After => 'a',
        };
        format!(
            "{}{MARKER_TAG}{plan_id}:{index}:{pos}{}{}",
            self.comment_open, stmt.anchor_line, self.comment_close
        )
    }

    /// Checks that a statement can be rendered and parsed back unambiguously.
    pub fn check_statement(&self, stmt: &LoggingStatement) -> Result<(), RenderError> {
        stmt.validate()?;
        for var in &stmt.variables {
            if var.contains(self.comment_close.as_str()) {
                return Err(RenderError::CommentTerminator(var.clone()));
            }
            let parts = split_top_level(var);
            if parts.len() != 1 || parts[0] != *var {
                return Err(RenderError::AmbiguousVariable(var.clone()));
            }
        }
        Ok(())
    }

    /// Renders `stmt` as a single marker-tagged line (without line terminator).
    pub fn render_statement(
        &self,
        stmt: &LoggingStatement,
        plan_id: &str,
        index: usize,
        indent: &str,
    ) -> String {
        let (pre, post) = self.call_affixes(stmt.severity);
        let mut message = self.message_prefix(stmt.severity, index);
        message.push_str(&self.render_template(&stmt.template));
        let mut args = quote(&message);
        for var in &stmt.variables {
            args.push_str(", ");
            args.push_str(var);
        }
        format!(
            "{indent}{pre}{args}{post} {}",
            self.marker(plan_id, index, stmt)
        )
    }

    fn render_template(&self, template: &str) -> String {
        let mut out = String::with_capacity(template.len() + 8);
        let mut rest = template;
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix(SLOT) {
                out.push_str(&self.placeholder);
                rest = r;
                continue;
            }
            let ch = rest.chars().next().unwrap_or_default();
            match ch {
                '{' if self.escape_braces => out.push_str("{{"),
                '}' if self.escape_braces => out.push_str("}}"),
                c => out.push(c),
            }
            rest = &rest[ch.len_utf8()..];
        }
        out
    }

    fn unrender_template(&self, rendered: &str) -> String {
        let mut out = String::with_capacity(rendered.len());
        let mut rest = rendered;
        while !rest.is_empty() {
            if self.escape_braces {
                if let Some(r) = rest.strip_prefix("{{") {
                    out.push('{');
                    rest = r;
                    continue;
                }
                if let Some(r) = rest.strip_prefix("}}") {
                    out.push('}');
                    rest = r;
                    continue;
                }
            }
            if let Some(r) = rest.strip_prefix(self.placeholder.as_str()) {
                out.push_str(SLOT);
                rest = r;
                continue;
            }
            let ch = rest.chars().next().unwrap_or_default();
            out.push(ch);
            rest = &rest[ch.len_utf8()..];
        }
        out
    }

    /// Locates a marker comment ending `line`.
    pub fn parse_marker(&self, line: &str) -> Option<Marker> {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let body = line.strip_suffix(self.comment_close.as_str())?;
        let open = format!("{}{MARKER_TAG}", self.comment_open);
        let start = body.rfind(open.as_str())?;
        let inner = &body[start + open.len()..];
        let mut parts = inner.rsplitn(3, ':');
        let pos_anchor = parts.next()?;
        let index = parts.next()?.parse::<usize>().ok()?;
        let plan_id = parts.next()?;
        validate_plan_id(plan_id).ok()?;
        let position = match pos_anchor.as_bytes().first()? {
            b'b' => Position::Before,
            b'a' => Position::After,
            _ => return None,
        };
        let digits = &pos_anchor[1..];
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let anchor_line = digits.parse::<u32>().ok().filter(|a| *a >= 1)?;
        Some(Marker {
            plan_id: plan_id.to_string(),
            index,
            position,
            anchor_line,
            start,
        })
    }

    pub fn is_marker_line(&self, line: &str) -> bool {
        self.parse_marker(line).is_some()
    }

    /// Parses a rendered line back into its marker and statement.
    pub fn parse_statement(&self, line: &str) -> Result<(Marker, LoggingStatement), RenderError> {
        let marker = self.parse_marker(line).ok_or(RenderError::NoMarker)?;
        let code = line[..marker.start]
            .strip_suffix(' ')
            .ok_or_else(|| RenderError::CallMismatch("missing marker separator".into()))?;
        let code = code.trim_start_matches([' ', '\t']);

        for severity in Severity::ALL {
            let (pre, post) = self.call_affixes(severity);
            let Some(args) = code
                .strip_prefix(pre.as_str())
                .and_then(|a| a.strip_suffix(post.as_str()))
            else {
                continue;
            };
            let Some((message, rest)) = unquote_prefix(args) else {
                continue;
            };
            let prefix = self.message_prefix(severity, marker.index);
            let Some(rendered_template) = message.strip_prefix(prefix.as_str()) else {
                continue;
            };
            let rest = rest.trim_start();
            let variables = if rest.is_empty() {
                Vec::new()
            } else {
                let Some(rest) = rest.strip_prefix(',') else {
                    continue;
                };
                split_top_level(rest)
            };
            let stmt = LoggingStatement {
                anchor_line: marker.anchor_line,
                position: marker.position,
                severity,
                template: self.unrender_template(rendered_template),
                variables,
            };
            stmt.validate()?;
            return Ok((marker, stmt));
        }
        Err(RenderError::CallMismatch(code.to_string()))
    }
}

/// Fields decoded from a marker comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marker {
    pub plan_id: String,
    pub index: usize,
    pub position: Position,
    pub anchor_line: u32,
    /// Byte offset of the comment opener within the line.
    pub start: usize,
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Parses a leading double-quoted literal, returning its content and the rest.
fn unquote_prefix(s: &str) -> Option<(String, &str)> {
    let mut chars = s.char_indices();
    if chars.next()?.1 != '"' {
        return None;
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, c) in chars {
        if escaped {
            out.push(c);
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return Some((out, &s[i + 1..]));
        } else {
            out.push(c);
        }
    }
    None
}

/// Splits on commas that are not nested in brackets or string literals.
/// Pieces are trimmed; an empty input yields no pieces.
pub fn split_top_level(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth: i32 = 0;
    let mut in_str = false;
    let mut escaped = false;
    let mut current = String::new();
    for c in s.chars() {
        if in_str {
            current.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                current.push(c);
            }
            '(' | '[' | '{' => {
                depth += 1;
                current.push(c);
            }
            ')' | ']' | '}' => {
                depth -= 1;
                current.push(c);
            }
            ',' if depth == 0 => {
                parts.push(current.trim().to_string());
                current.clear();
            }
            c => current.push(c),
        }
    }
    if !current.trim().is_empty() || !parts.is_empty() {
        parts.push(current.trim().to_string());
    }
    parts
}
