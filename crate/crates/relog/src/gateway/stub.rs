//! Deterministic rule-based provider for offline runs.
//!
//! Each template has a fixed rule:
//!
//! - generation: with an exception frame inside the unit at line `L`, log
//!   every variable assigned in `[L-2, L+2]` of the enclosing function and the
//!   known variables used on `L`; otherwise log function parameters on entry
//!   and identifiers that are returned as-is.
//! - repair: move a statement blamed for unreachable code in front of its
//!   anchor, drop any other blamed statement.
//! - critic: sufficient iff an event carries one of the configured key
//!   variables; otherwise one `add` item for that variable.
//! - refinement: apply feedback literally.
//! - debug agent: report the first logged value that breaks an expectation,
//!   else the top exception frame, else nothing.

use std::sync::LazyLock;

use regex::Regex;
use relog_core::{
    CriticVerdict, FeedbackAction, FeedbackItem, LoggingPlan, LoggingStatement, PlanEdit, Position,
    RenderProfile, Severity,
};
use serde::{Deserialize, Serialize};

use super::schema::{DebugVerdict, EditList, Location};
use super::templates::{CRITIC, DEBUG_DIRECT, DEBUG_INDIRECT, GENERATION, REFINEMENT, REPAIR};
use super::{Provider, ProviderError, ProviderKind, Request};
use crate::summary::{DiagnosticSummary, OutcomeSummary};
use crate::syntax::{self, MethodSpan};
use crate::toolchain::LogEvent;

/// A variable whose logged value settles sufficiency. With `function` set,
/// only statements inside that function count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyVariable {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Every logged value must satisfy the expectation.
    #[default]
    All,
    /// Only the last logged value is checked.
    Final,
}

/// A declared property of a logged value, e.g. `idx lt 4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub variable: String,
    pub op: CmpOp,
    pub value: String,
    #[serde(default)]
    pub scope: Scope,
}

impl Expectation {
    pub fn holds(&self, actual: &str) -> bool {
        let actual = actual.trim();
        match (actual.parse::<i128>(), self.value.trim().parse::<i128>()) {
            (Ok(a), Ok(b)) => match self.op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            },
            _ => match self.op {
                CmpOp::Eq => actual == self.value.trim(),
                CmpOp::Ne => actual != self.value.trim(),
                _ => true,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixerMode {
    #[default]
    Rules,
    /// Returns the plan unchanged.
    Noop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    #[default]
    Rules,
    AlwaysInsufficient,
    AlwaysSufficient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubConfig {
    #[serde(default)]
    pub key_variables: Vec<KeyVariable>,
    #[serde(default)]
    pub expectations: Vec<Expectation>,
    /// Generation adds one statement that cannot compile.
    #[serde(default)]
    pub inject_broken: bool,
    #[serde(default)]
    pub fixer: FixerMode,
    #[serde(default)]
    pub critic: CriticMode,
    /// Patch the agent proposes when it finds the defect in direct mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<relog_core::Patch>,
}

pub struct StubProvider {
    config: StubConfig,
    method_re: Regex,
}

impl StubProvider {
    pub fn new(config: StubConfig, render: &RenderProfile) -> Result<Self, regex::Error> {
        Ok(Self { config, method_re: Regex::new(&render.method_pattern)? })
    }

    pub fn config(&self) -> &StubConfig {
        &self.config
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("stub output serializes")
}

fn bad_slot(name: &str, e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Unavailable(format!("stub cannot read slot {name}: {e}"))
}

fn parse_slot<T: serde::de::DeserializeOwned>(req: &Request<'_>, name: &str) -> Result<T, ProviderError> {
    serde_json::from_str(req.envelope.get(name)).map_err(|e| bad_slot(name, e))
}

impl Provider for StubProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Stub
    }

    fn complete(&self, req: &Request<'_>) -> Result<String, ProviderError> {
        let env = req.envelope;
        let lines = syntax::unnumbered(env.get("code"));
        match env.template_id.as_str() {
            GENERATION => {
                let outcome: OutcomeSummary = parse_slot(req, "outcome")?;
                Ok(json(&self.generate(&lines, env.get("unit_path"), &outcome)))
            }
            REPAIR => {
                let plan: LoggingPlan = parse_slot(req, "plan")?;
                let diags: Vec<DiagnosticSummary> = serde_json::from_str(env.get("diagnostics")).unwrap_or_default();
                Ok(json(&self.repair(plan, &diags)))
            }
            CRITIC => {
                let plan: LoggingPlan = parse_slot(req, "plan")?;
                let outcome: OutcomeSummary = parse_slot(req, "outcome")?;
                Ok(json(&self.critic(&lines, &plan, &outcome.events)))
            }
            REFINEMENT => {
                let feedback: Vec<FeedbackItem> = parse_slot(req, "feedback")?;
                Ok(json(&refine(&feedback)))
            }
            DEBUG_DIRECT | DEBUG_INDIRECT => {
                let plan: LoggingPlan = parse_slot(req, "plan")?;
                let events: Vec<LogEvent> = parse_slot(req, "logs")?;
                let outcome: OutcomeSummary = parse_slot(req, "outcome")?;
                let verdict = if env.template_id == DEBUG_DIRECT {
                    self.debug(&lines, env.get("unit_path"), false, &plan, &events, &outcome)
                } else {
                    let path = env.get("instrumented_path");
                    let caller = split_sources(env.get("callers"))
                        .into_iter()
                        .find(|(p, _)| p == path)
                        .map(|(_, l)| l)
                        .unwrap_or_default();
                    self.debug(&caller, path, true, &plan, &events, &outcome)
                };
                Ok(json(&verdict))
            }
            other => Err(ProviderError::Unavailable(format!("stub has no rule for template {other}"))),
        }
    }
}

/// Splits a multi-file slot written by [`join_sources`].
pub fn split_sources(text: &str) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if let Some(path) = line.strip_prefix("=== ").and_then(|l| l.strip_suffix(" ===")) {
            out.push((path.to_string(), String::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    out.into_iter().map(|(p, b)| (p, syntax::unnumbered(&b))).collect()
}

/// Numbered sources, each under an `=== path ===` header.
pub fn join_sources<'a>(units: impl IntoIterator<Item = (&'a str, &'a [String])>) -> String {
    let mut out = String::new();
    for (path, lines) in units {
        out.push_str(&format!("=== {path} ===\n"));
        out.push_str(&syntax::numbered(lines));
    }
    out
}

static PAIR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)([A-Za-z_][A-Za-z0-9_.]*)=").unwrap());

/// `name=value` pairs in a log message. A value runs up to the next pair.
pub fn logged_values(message: &str) -> Vec<(String, String)> {
    let found: Vec<(usize, usize, String)> = PAIR_RE
        .captures_iter(message)
        .map(|c| {
            let whole = c.get(0).unwrap();
            let name = c.get(1).unwrap();
            (name.start(), whole.end(), name.as_str().to_string())
        })
        .collect();
    found
        .iter()
        .enumerate()
        .map(|(i, (_, value_start, name))| {
            let end = found.get(i + 1).map(|n| n.0).unwrap_or(message.len());
            (name.clone(), message[*value_start..end].trim().to_string())
        })
        .collect()
}

fn stmt(anchor: u32, position: Position, severity: Severity, label: &str, vars: &[String]) -> LoggingStatement {
    let mut parts: Vec<String> = if label.is_empty() { Vec::new() } else { vec![label.to_string()] };
    parts.extend(vars.iter().map(|v| format!("{v}={{}}")));
    LoggingStatement::new(anchor, position, severity, parts.join(" "), vars.to_vec())
}

impl StubProvider {
    fn spans(&self, lines: &[String]) -> Vec<MethodSpan> {
        syntax::method_spans(lines, &self.method_re)
    }

    fn enclosing(&self, lines: &[String], line: u32) -> Option<MethodSpan> {
        syntax::enclosing_method(lines, line, &self.method_re)
    }

    /// Parameters and names bound in `span` strictly before `line`.
    fn known_before(lines: &[String], span: &MethodSpan, line: u32) -> Vec<String> {
        let mut known = syntax::parameters(&lines[span.start as usize - 1]);
        for l in span.start + 1..line {
            if let Some(v) = syntax::bound_variable(&lines[l as usize - 1]) {
                known.push(v);
            }
        }
        known
    }

    pub fn generate(&self, lines: &[String], unit_path: &str, outcome: &OutcomeSummary) -> LoggingPlan {
        let n = lines.len() as u32;
        let mut stmts = Vec::new();
        let frame_line = outcome
            .exception
            .as_ref()
            .and_then(|e| e.frames.iter().find(|f| f.file == unit_path).and_then(|f| f.line))
            .filter(|l| (1..=n).contains(l));

        if let Some(at) = frame_line {
            let span = self.enclosing(lines, at);
            let (lo, hi) = match &span {
                Some(s) => (at.saturating_sub(2).max(s.body_open + 1), (at + 2).min(s.end - 1)),
                None => (at.saturating_sub(2).max(1), (at + 2).min(n)),
            };
            for l in lo..=hi {
                if let Some(v) = syntax::assigned_variable(&lines[l as usize - 1]) {
                    stmts.push(stmt(l, Position::After, Severity::Debug, "", &[v]));
                }
            }
            if let Some(s) = &span {
                let known = Self::known_before(lines, s, at);
                let used: Vec<String> = syntax::identifiers(&lines[at as usize - 1])
                    .into_iter()
                    .filter(|v| known.contains(v))
                    .collect();
                if !used.is_empty() {
                    stmts.push(stmt(at, Position::Before, Severity::Debug, "", &used));
                }
            }
        } else {
            for span in self.spans(lines) {
                let sig = &lines[span.start as usize - 1];
                let params = syntax::parameters(sig);
                if !params.is_empty() && span.body_open < span.end {
                    let label = format!("enter {}", span.name);
                    stmts.push(stmt(span.body_open, Position::After, Severity::Info, &label, &params));
                }
                for l in span.body_open + 1..span.end {
                    let Some(v) = syntax::returned_identifier(&lines[l as usize - 1]) else { continue };
                    if Self::known_before(lines, &span, l).contains(&v) {
                        stmts.push(stmt(l, Position::Before, Severity::Debug, "return", &[v]));
                    }
                }
            }
        }

        if self.config.inject_broken {
            let ret = (1..=n).find(|&l| {
                let t = lines[l as usize - 1].trim();
                t.starts_with("return") && t.ends_with(';')
            });
            match ret {
                Some(l) => stmts.push(stmt(l, Position::After, Severity::Info, "reached end", &[])),
                None => {
                    let at = self.spans(lines).first().map(|s| s.body_open).unwrap_or(1);
                    stmts.push(stmt(at, Position::After, Severity::Debug, "", &["undeclared_probe".to_string()]));
                }
            }
        }
        LoggingPlan::with_statements("draft", 0, stmts)
    }

    pub fn repair(&self, mut plan: LoggingPlan, diags: &[DiagnosticSummary]) -> LoggingPlan {
        if self.config.fixer == FixerMode::Noop {
            return plan;
        }
        let mut blamed: Vec<usize> = diags.iter().filter_map(|d| d.statement).collect();
        if blamed.is_empty() {
            // Nothing points at a plan line: drop statements anchored where errors are.
            let lines: Vec<u32> = diags.iter().filter_map(|d| d.line).collect();
            plan.statements.retain(|s| !lines.contains(&s.anchor_line));
            return plan;
        }
        blamed.sort_unstable();
        blamed.dedup();
        for &i in blamed.iter().rev() {
            if i >= plan.statements.len() {
                continue;
            }
            let unreachable = diags
                .iter()
                .any(|d| d.statement == Some(i) && d.message.to_ascii_lowercase().contains("unreachable"));
            if unreachable && plan.statements[i].position == Position::After {
                plan.statements[i].position = Position::Before;
            } else {
                plan.statements.remove(i);
            }
        }
        plan
    }

    fn covers(&self, lines: &[String], plan: &LoggingPlan, event: &LogEvent, key: &KeyVariable) -> bool {
        if !logged_values(&event.message).iter().any(|(n, _)| *n == key.name) {
            return false;
        }
        let Some(function) = &key.function else { return true };
        event
            .source_marker
            .and_then(|i| plan.statements.get(i))
            .and_then(|s| self.enclosing(lines, s.anchor_line))
            .is_some_and(|m| &m.name == function)
    }

    /// Where to log `key`: after its last assignment in its function, else
    /// after the line binding it, else at function entry.
    fn feedback_anchor(&self, lines: &[String], key: &KeyVariable) -> Option<u32> {
        let spans = self.spans(lines);
        let scope: Vec<&MethodSpan> = match &key.function {
            Some(f) => spans.iter().filter(|s| &s.name == f).collect(),
            None => spans.iter().collect(),
        };
        let in_scope = |l: u32| scope.is_empty() || scope.iter().any(|s| s.body_open < l && l < s.end);
        let n = lines.len() as u32;
        (1..=n)
            .rev()
            .find(|&l| in_scope(l) && syntax::assigned_variable(&lines[l as usize - 1]).as_deref() == Some(&key.name))
            .or_else(|| {
                (1..=n).rev().find(|&l| {
                    in_scope(l) && syntax::bound_variable(&lines[l as usize - 1]).as_deref() == Some(&key.name)
                })
            })
            .or_else(|| {
                scope
                    .iter()
                    .find(|s| syntax::parameters(&lines[s.start as usize - 1]).contains(&key.name))
                    .map(|s| s.body_open)
            })
    }

    fn add_feedback(&self, lines: &[String]) -> Vec<FeedbackItem> {
        match self.config.key_variables.first() {
            Some(key) => vec![FeedbackItem {
                action: FeedbackAction::Add,
                target_anchor: self.feedback_anchor(lines, key),
                subject: key.name.clone(),
                detail: "after: its value is never logged".into(),
            }],
            None => {
                // The last assignment in the unit is the best guess at the
                // state that decides the outcome.
                let n = lines.len() as u32;
                let found = (1..=n).rev().find_map(|l| {
                    let text = &lines[l as usize - 1];
                    syntax::assigned_variable(text).or_else(|| syntax::bound_variable(text)).map(|v| (l, v))
                });
                let (target_anchor, subject) = match found {
                    Some((l, v)) => (Some(l), v),
                    None => (None, "state".into()),
                };
                vec![FeedbackItem {
                    action: FeedbackAction::Add,
                    target_anchor,
                    subject,
                    detail: "after: log the values that decide the outcome".into(),
                }]
            }
        }
    }

    pub fn critic(&self, lines: &[String], plan: &LoggingPlan, events: &[LogEvent]) -> CriticVerdict {
        let verdict = |t, s, c, sufficient, feedback, rationale: &str| CriticVerdict {
            traceability: t,
            state_visibility: s,
            causal_linkage: c,
            extra: Default::default(),
            sufficient,
            feedback,
            rationale: rationale.to_string(),
        };
        match self.config.critic {
            CriticMode::AlwaysSufficient => return verdict(2, 2, 2, true, Vec::new(), "accepted"),
            CriticMode::AlwaysInsufficient => {
                return verdict(1, 1, 1, false, self.add_feedback(lines), "never satisfied")
            }
            CriticMode::Rules => {}
        }
        if events.is_empty() {
            return verdict(0, 0, 0, false, self.add_feedback(lines), "no log events were emitted");
        }
        let mut markers: Vec<usize> = events.iter().filter_map(|e| e.source_marker).collect();
        markers.sort_unstable();
        markers.dedup();
        let traceability = if markers.len() >= 2 { 2 } else { 1 };
        let any_value = events.iter().any(|e| !logged_values(&e.message).is_empty());
        // Without key variables any logged value from two statements will do.
        let covered = if self.config.key_variables.is_empty() {
            any_value && markers.len() >= 2
        } else {
            self.config.key_variables.iter().any(|k| events.iter().any(|e| self.covers(lines, plan, e, k)))
        };
        let state = if covered { 2 } else if any_value { 1 } else { 0 };
        let causal = if covered { 2 } else { 1 };
        if covered {
            verdict(traceability, state, causal, true, Vec::new(), "a key variable is logged")
        } else {
            verdict(traceability, state, causal, false, self.add_feedback(lines), "key state is not visible")
        }
    }

    fn violation<'a>(&self, events: &'a [LogEvent]) -> Option<(&'a LogEvent, String, String)> {
        let mut best: Option<(&LogEvent, String, String)> = None;
        for exp in &self.config.expectations {
            let carrying: Vec<(&LogEvent, String)> = events
                .iter()
                .filter_map(|e| {
                    logged_values(&e.message)
                        .into_iter()
                        .find(|(n, _)| *n == exp.variable)
                        .map(|(_, v)| (e, v))
                })
                .collect();
            let hit = match exp.scope {
                Scope::All => carrying.into_iter().find(|(_, v)| !exp.holds(v)),
                Scope::Final => carrying.into_iter().last().filter(|(_, v)| !exp.holds(v)),
            };
            if let Some((e, v)) = hit {
                if best.as_ref().is_none_or(|b| e.sequence < b.0.sequence) {
                    best = Some((e, exp.variable.clone(), v));
                }
            }
        }
        best
    }

    /// With `indirect`, `lines` is a caller and the defective module is out
    /// of sight, so a bad value is traced to the call that produced it.
    pub fn debug(
        &self,
        lines: &[String],
        path: &str,
        indirect: bool,
        plan: &LoggingPlan,
        events: &[LogEvent],
        outcome: &OutcomeSummary,
    ) -> DebugVerdict {
        if let Some((event, var, value)) = self.violation(events) {
            if let Some(anchor) = event.source_marker.and_then(|i| plan.statements.get(i)).map(|s| s.anchor_line) {
                let mut location = Location { file: Some(path.to_string()), line: Some(anchor), method: None };
                if indirect {
                    if let Some(call) = self.origin_call(lines, anchor, &var) {
                        location = call;
                    }
                }
                return DebugVerdict {
                    defect_reported: true,
                    location: Some(location),
                    explanation: format!("{var}={value} breaks the expected behaviour"),
                    patch: self.config.repair.clone().filter(|_| !indirect),
                };
            }
        }
        if let Some(exc) = &outcome.exception {
            if let Some(frame) = exc.frames.first() {
                return DebugVerdict {
                    defect_reported: true,
                    location: Some(Location { file: Some(frame.file.clone()), line: frame.line, method: None }),
                    explanation: format!("{}: {}", exc.type_name, exc.message),
                    patch: self.config.repair.clone().filter(|_| !indirect),
                };
            }
        }
        DebugVerdict::not_detected("the logs show nothing wrong")
    }

    /// The call that produced `var`, found on its last assignment at or
    /// before `anchor`.
    fn origin_call(&self, lines: &[String], anchor: u32, var: &str) -> Option<Location> {
        let floor = self.enclosing(lines, anchor).map(|s| s.start).unwrap_or(1);
        (floor..=anchor.min(lines.len() as u32)).rev().find_map(|l| {
            let text = &lines[l as usize - 1];
            let assigns = syntax::bound_variable(text).as_deref() == Some(var)
                || syntax::assigned_variable(text).as_deref() == Some(var);
            if !assigns {
                return None;
            }
            let (module, name) = syntax::first_call(text)?;
            Some(Location {
                file: (!module.is_empty()).then(|| format!("{}.rs", module.rsplit("::").next().unwrap_or(&module))),
                line: None,
                method: Some(name),
            })
        })
    }
}

fn refine(feedback: &[FeedbackItem]) -> EditList {
    let mut edits = Vec::new();
    for item in feedback {
        match item.action {
            FeedbackAction::Add => {
                let Some(anchor) = item.target_anchor else { continue };
                let ident = !item.subject.is_empty()
                    && item.subject.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
                if !ident {
                    continue;
                }
                let position = if item.detail.trim_start().starts_with("before") { Position::Before } else { Position::After };
                edits.push(PlanEdit::add(stmt(anchor, position, Severity::Debug, "", std::slice::from_ref(&item.subject))));
            }
            FeedbackAction::Remove => {
                if let Some(anchor) = item.target_anchor {
                    edits.push(PlanEdit::remove(anchor));
                }
            }
            FeedbackAction::Modify => {
                let Some(anchor) = item.target_anchor else { continue };
                let mut edit = PlanEdit::modify(anchor);
                for part in item.detail.split([',', ';']) {
                    let Some((k, v)) = part.split_once('=') else { continue };
                    let v = v.trim();
                    match k.trim() {
                        "severity" => edit.severity = v.parse().ok(),
                        "position" => {
                            edit.position = match v {
                                "before" => Some(Position::Before),
                                "after" => Some(Position::After),
                                _ => None,
                            }
                        }
                        "anchor_line" => edit.anchor_line = v.parse().ok(),
                        _ => {}
                    }
                }
                edits.push(edit);
            }
        }
    }
    EditList { edits }
}
