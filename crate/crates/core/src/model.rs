//! Logging statements, plans and the source units they are rendered into.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

/// Placeholder slot marker inside a [`LoggingStatement`] template.
///
/// Templates are stored in this neutral form; a [`crate::RenderProfile`]
/// substitutes the target language's own placeholder when rendering.
pub const SLOT: &str = "{}";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("logging template is empty")]
    EmptyTemplate,
    #[error("template has {slots} placeholder slot(s) but {variables} variable(s)")]
    SlotMismatch { slots: usize, variables: usize },
    #[error("anchor line must be >= 1")]
    AnchorZero,
    #[error("anchor line {line} exceeds source length {len}")]
    AnchorOutOfRange { line: u32, len: usize },
    #[error("invalid variable expression {0:?}")]
    InvalidVariable(String),
    #[error("template contains a control character")]
    ControlCharacter,
    #[error("invalid plan id {0:?}")]
    InvalidPlanId(String),
    #[error("source digest mismatch: stored {stored}, computed {computed}")]
    DigestMismatch { stored: String, computed: String },
}

/// Severity level of a logging statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Trace,
    Debug,
    Info,
    Warn,
    Error,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Trace,
        Severity::Debug,
        Severity::Info,
        Severity::Warn,
        Severity::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Trace => "trace",
            Severity::Debug => "debug",
            Severity::Info => "info",
            Severity::Warn => "warn",
            Severity::Error => "error",
        }
    }

    /// Upper-case tag emitted in runtime output (`INFO`, `WARN`, ...).
    pub fn tag(self) -> &'static str {
        match self {
            Severity::Trace => "TRACE",
            Severity::Debug => "DEBUG",
            Severity::Info => "INFO",
            Severity::Warn => "WARN",
            Severity::Error => "ERROR",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .into_iter()
            .find(|sev| sev.as_str().eq_ignore_ascii_case(s))
            .or(match s.to_ascii_lowercase().as_str() {
                "warning" => Some(Severity::Warn),
                "fatal" => Some(Severity::Error),
                _ => None,
            })
            .ok_or(())
    }
}

/// Where a statement goes relative to its anchor line.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    #[default]
    Before,
    After,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Position::Before => "before",
            Position::After => "after",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Position::Before => Position::After,
            Position::After => Position::Before,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line-anchored logging statement: severity, static template with
/// `{}` slots, and one variable expression per slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingStatement {
    pub anchor_line: u32,
    #[serde(default)]
    pub position: Position,
    pub severity: Severity,
    pub template: String,
    #[serde(default)]
    pub variables: Vec<String>,
}

impl LoggingStatement {
    pub fn new(
        anchor_line: u32,
        position: Position,
        severity: Severity,
        template: impl Into<String>,
        variables: Vec<String>,
    ) -> Self {
        Self {
            anchor_line,
            position,
            severity,
            template: template.into(),
            variables,
        }
    }

    /// Number of `{}` slots in the template.
    pub fn slot_count(&self) -> usize {
        count_slots(&self.template)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.anchor_line == 0 {
            return Err(ModelError::AnchorZero);
        }
        if self.template.is_empty() {
            return Err(ModelError::EmptyTemplate);
        }
        if self.template.chars().any(char::is_control) {
            return Err(ModelError::ControlCharacter);
        }
        for var in &self.variables {
            if var.is_empty() || var.trim() != var || var.chars().any(char::is_control) {
                return Err(ModelError::InvalidVariable(var.clone()));
            }
        }
        let slots = self.slot_count();
        if slots != self.variables.len() {
            return Err(ModelError::SlotMismatch {
                slots,
                variables: self.variables.len(),
            });
        }
        Ok(())
    }

    /// True if `name` appears as a whole identifier in any variable expression.
    pub fn mentions_variable(&self, name: &str) -> bool {
        self.variables
            .iter()
            .any(|expr| contains_identifier(expr, name))
    }
}

pub(crate) fn count_slots(template: &str) -> usize {
    template.matches(SLOT).count()
}

/// Whole-word identifier search (`acc` matches `acc` and `self.acc`, not `accum`).
pub fn contains_identifier(haystack: &str, ident: &str) -> bool {
    if ident.is_empty() {
        return false;
    }
    let bytes = haystack.as_bytes();
    let is_ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let mut start = 0;
    while let Some(off) = haystack[start..].find(ident) {
        let at = start + off;
        let end = at + ident.len();
        let before_ok = at == 0 || !is_ident(bytes[at - 1]);
        let after_ok = end >= bytes.len() || !is_ident(bytes[end]);
        if before_ok && after_ok {
            return true;
        }
        start = at + 1;
    }
    false
}

/// Ordered list of logging statements kept apart from the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingPlan {
    pub plan_id: String,
    pub revision: u32,
    pub statements: Vec<LoggingStatement>,
}

impl LoggingPlan {
    pub fn new(plan_id: impl Into<String>) -> Self {
        Self {
            plan_id: plan_id.into(),
            revision: 0,
            statements: Vec::new(),
        }
    }

    pub fn with_statements(
        plan_id: impl Into<String>,
        revision: u32,
        statements: Vec<LoggingStatement>,
    ) -> Self {
        Self {
            plan_id: plan_id.into(),
            revision,
            statements,
        }
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Checks statement invariants and, when `line_count` is given, anchor bounds.
    pub fn validate(&self, line_count: Option<usize>) -> Result<(), ModelError> {
        validate_plan_id(&self.plan_id)?;
        for stmt in &self.statements {
            stmt.validate()?;
            if let Some(len) = line_count {
                if stmt.anchor_line as usize > len {
                    return Err(ModelError::AnchorOutOfRange {
                        line: stmt.anchor_line,
                        len,
                    });
                }
            }
        }
        Ok(())
    }

    /// Statements anchored at `line`, with their plan indices.
    pub fn at_anchor(&self, line: u32) -> impl Iterator<Item = (usize, &LoggingStatement)> {
        self.statements
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.anchor_line == line)
    }
}

pub(crate) fn validate_plan_id(id: &str) -> Result<(), ModelError> {
    let ok = !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidPlanId(id.to_string()))
    }
}

/// A source file split into lines, with a content digest.
///
/// `lines` never contain `'\n'`; a `'\r'` from CRLF files stays at the end of
/// its line so the text reproduces byte-for-byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub lines: Vec<String>,
    pub trailing_newline: bool,
    pub digest: String,
}

impl SourceUnit {
    pub fn from_text(path: impl Into<String>, text: &str) -> Self {
        let (lines, trailing_newline) = split_lines(text);
        Self::from_lines(path, lines, trailing_newline)
    }

    pub fn from_lines(path: impl Into<String>, lines: Vec<String>, trailing_newline: bool) -> Self {
        let digest = sha256_hex(join_lines(&lines, trailing_newline).as_bytes());
        Self {
            path: path.into(),
            lines,
            trailing_newline,
            digest,
        }
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// 1-based line access.
    pub fn line(&self, n: u32) -> Option<&str> {
        n.checked_sub(1)
            .and_then(|i| self.lines.get(i as usize))
            .map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        join_lines(&self.lines, self.trailing_newline)
    }

    pub fn computed_digest(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn check_digest(&self) -> Result<(), ModelError> {
        let computed = self.computed_digest();
        if computed == self.digest {
            Ok(())
        } else {
            Err(ModelError::DigestMismatch {
                stored: self.digest.clone(),
                computed,
            })
        }
    }
}

/// Source with a plan rendered into it as marker-tagged lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentedUnit {
    pub base_path: String,
    pub base_digest: String,
    pub trailing_newline: bool,
    pub plan_id: String,
    pub plan_revision: u32,
    pub rendered_lines: Vec<String>,
    /// `line_map[i]` is the 1-based rendered line of original line `i + 1`.
    pub line_map: Vec<u32>,
}

impl InstrumentedUnit {
    pub fn to_text(&self) -> String {
        join_lines(&self.rendered_lines, self.trailing_newline)
    }

    /// Rendered line of an original line (both 1-based).
    pub fn rendered_line_of(&self, original: u32) -> Option<u32> {
        original
            .checked_sub(1)
            .and_then(|i| self.line_map.get(i as usize))
            .copied()
    }

    /// Original line of a rendered line, if it is not a plan line.
    pub fn original_line_of(&self, rendered: u32) -> Option<u32> {
        self.line_map
            .binary_search(&rendered)
            .ok()
            .map(|i| i as u32 + 1)
    }
}

pub(crate) fn split_lines(text: &str) -> (Vec<String>, bool) {
    if text.is_empty() {
        return (Vec::new(), false);
    }
    let trailing = text.ends_with('\n');
    let body = if trailing { &text[..text.len() - 1] } else { text };
    (body.split('\n').map(String::from).collect(), trailing)
}

pub(crate) fn join_lines(lines: &[String], trailing_newline: bool) -> String {
    let mut out = lines.join("\n");
    if trailing_newline && !lines.is_empty() {
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn slot_count_must_match_variables() {
        let s = LoggingStatement::new(3, Position::Before, Severity::Info, "x={} y={}", vec!["x".into()]);
        assert_eq!(
            s.validate(),
            Err(ModelError::SlotMismatch { slots: 2, variables: 1 })
        );
    }

    #[test]
    fn anchor_zero_and_empty_template_rejected() {
        let s = LoggingStatement::new(0, Position::Before, Severity::Info, "hi", vec![]);
        assert_eq!(s.validate(), Err(ModelError::AnchorZero));
        let s = LoggingStatement::new(1, Position::Before, Severity::Info, "", vec![]);
        assert_eq!(s.validate(), Err(ModelError::EmptyTemplate));
    }

    #[test]
    fn plan_bounds_checked_against_source() {
        let plan = LoggingPlan::with_statements(
            "p",
            0,
            vec![LoggingStatement::new(5, Position::Before, Severity::Debug, "here", vec![])],
        );
        assert_eq!(
            plan.validate(Some(4)),
            Err(ModelError::AnchorOutOfRange { line: 5, len: 4 })
        );
        assert!(plan.validate(Some(5)).is_ok());
    }

    #[test]
    fn source_text_roundtrips_with_crlf_and_no_trailing_newline() {
        for text in ["a\r\nb\r\n", "a\nb", "", "\n", "x\n\n"] {
            let unit = SourceUnit::from_text("f.rs", text);
            assert_eq!(unit.to_text(), text);
            assert!(unit.check_digest().is_ok());
        }
    }

    #[test]
    fn digest_detects_tampering() {
        let mut unit = SourceUnit::from_text("f.rs", "a\nb\n");
        unit.lines[0].push('!');
        assert!(matches!(unit.check_digest(), Err(ModelError::DigestMismatch { .. })));
    }

    #[test]
    fn identifier_search_is_word_bounded() {
        assert!(contains_identifier("self.acc", "acc"));
        assert!(contains_identifier("acc", "acc"));
        assert!(!contains_identifier("accum", "acc"));
        assert!(!contains_identifier("my_acc", "acc"));
    }

    #[test]
    fn plan_json_has_exact_field_set() {
        let plan = LoggingPlan::with_statements(
            "p1",
            2,
            vec![LoggingStatement::new(4, Position::After, Severity::Warn, "v={}", vec!["v".into()])],
        );
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(
            json,
            r#"{"plan_id":"p1","revision":2,"statements":[{"anchor_line":4,"position":"after","severity":"warn","template":"v={}","variables":["v"]}]}"#
        );
        let extra = r#"{"plan_id":"p1","revision":2,"statements":[],"extra":1}"#;
        assert!(serde_json::from_str::<LoggingPlan>(extra).is_err());
    }
}
