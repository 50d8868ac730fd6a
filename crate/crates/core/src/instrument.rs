//! Inserting a plan into pristine source and taking it back out.
//!
//! Every plan statement becomes exactly one rendered line carrying a marker
//! comment. Removing the marker lines always gives back the original text,
//! which is what lets the repair and refinement stages edit only the plan.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InstrumentedUnit, LoggingPlan, ModelError, SourceUnit};
use crate::render::{RenderError, RenderProfile};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("statement {index}: {source}")]
    Render { index: usize, source: RenderError },
    #[error("anchor line {0} is outside the source")]
    AnchorOutOfRange(u32),
    #[error("source line {0} already carries a plan marker")]
    SourceContainsMarker(u32),
    #[error("rendered line {line}: {reason}")]
    MarkerCorruption { line: u32, reason: String },
    #[error("stripped source does not match the base digest")]
    BaseMismatch,
}

/// Renders `plan` into `source`.
///
/// `before` statements go immediately above their anchor and `after`
/// statements immediately below it; statements sharing an anchor and position
/// keep their plan order.
pub fn apply_plan(
    source: &SourceUnit,
    plan: &LoggingPlan,
    profile: &RenderProfile,
) -> Result<InstrumentedUnit, InstrumentError> {
    plan.validate(None)?;
    let len = source.line_count();
    let mut before: Vec<Vec<usize>> = vec![Vec::new(); len];
    let mut after: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (index, stmt) in plan.statements.iter().enumerate() {
        profile
            .check_statement(stmt)
            .map_err(|source| InstrumentError::Render { index, source })?;
        let slot = stmt.anchor_line as usize;
        if slot == 0 || slot > len {
            return Err(InstrumentError::AnchorOutOfRange(stmt.anchor_line));
        }
        match stmt.position {
            crate::Position::Before => before[slot - 1].push(index),
            crate::Position::After => after[slot - 1].push(index),
        }
    }

    let mut rendered = Vec::with_capacity(len + plan.len());
    let mut line_map = Vec::with_capacity(len);
    for (i, line) in source.lines.iter().enumerate() {
        if profile.is_marker_line(line) {
            return Err(InstrumentError::SourceContainsMarker(i as u32 + 1));
        }
        let indent = leading_whitespace(line);
        let cr = if line.ends_with('\r') { "\r" } else { "" };
        let emit = |index: usize, out: &mut Vec<String>| {
            let mut text =
                profile.render_statement(&plan.statements[index], &plan.plan_id, index, indent);
            text.push_str(cr);
            out.push(text);
        };
        for &index in &before[i] {
            emit(index, &mut rendered);
        }
        rendered.push(line.clone());
        line_map.push(rendered.len() as u32);
        for &index in &after[i] {
            emit(index, &mut rendered);
        }
    }

    Ok(InstrumentedUnit {
        base_path: source.path.clone(),
        base_digest: source.digest.clone(),
        trailing_newline: source.trailing_newline,
        plan_id: plan.plan_id.clone(),
        plan_revision: plan.revision,
        rendered_lines: rendered,
        line_map,
    })
}

/// Recovers the pristine source and the exact plan from an instrumented unit.
pub fn strip_plan(
    instr: &InstrumentedUnit,
    profile: &RenderProfile,
) -> Result<(SourceUnit, LoggingPlan), InstrumentError> {
    let corrupt = |line: usize, reason: &str| InstrumentError::MarkerCorruption {
        line: line as u32,
        reason: reason.to_string(),
    };

    let mut originals = Vec::with_capacity(instr.line_map.len());
    let mut found = Vec::new();
    let mut next_original = instr.line_map.iter().peekable();
    for (i, line) in instr.rendered_lines.iter().enumerate() {
        let rendered_no = i as u32 + 1;
        if next_original.peek() == Some(&&rendered_no) {
            next_original.next();
            if profile.is_marker_line(line) {
                return Err(corrupt(i + 1, "original line carries a marker"));
            }
            originals.push(line.clone());
            continue;
        }
        let bare = line.strip_suffix('\r').unwrap_or(line);
        let (marker, stmt) = profile
            .parse_statement(bare)
            .map_err(|e| corrupt(i + 1, &e.to_string()))?;
        if marker.plan_id != instr.plan_id {
            return Err(corrupt(i + 1, "marker belongs to another plan"));
        }
        found.push((marker.index, stmt, i + 1));
    }
    if next_original.next().is_some() {
        return Err(corrupt(instr.rendered_lines.len(), "line map points past the end"));
    }

    found.sort_by_key(|(index, _, _)| *index);
    for (expected, (index, _, line)) in found.iter().enumerate() {
        if *index != expected {
            return Err(corrupt(*line, "statement indices are not contiguous"));
        }
    }

    let source = SourceUnit::from_lines(instr.base_path.clone(), originals, instr.trailing_newline);
    if source.digest != instr.base_digest {
        return Err(InstrumentError::BaseMismatch);
    }
    let plan = LoggingPlan {
        plan_id: instr.plan_id.clone(),
        revision: instr.plan_revision,
        statements: found.into_iter().map(|(_, s, _)| s).collect(),
    };
    Ok((source, plan))
}

/// Outcome of comparing an instrumented unit with its original source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub ok: bool,
    pub divergence: Option<Divergence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// 1-based original line where the texts first differ.
    pub original_line: u32,
    pub expected: Option<String>,
    pub found: Option<String>,
}

/// Removes every marker line and compares what is left with `original`.
pub fn verify_logic_preserved(
    original: &SourceUnit,
    instr: &InstrumentedUnit,
    profile: &RenderProfile,
) -> PreservationReport {
    let remaining: Vec<&String> = instr
        .rendered_lines
        .iter()
        .filter(|l| !profile.is_marker_line(l))
        .collect();
    let n = remaining.len().max(original.lines.len());
    for i in 0..n {
        let expected = original.lines.get(i);
        let found = remaining.get(i).copied();
        if expected != found {
            return PreservationReport {
                ok: false,
                divergence: Some(Divergence {
                    original_line: i as u32 + 1,
                    expected: expected.cloned(),
                    found: found.cloned(),
                }),
            };
        }
    }
    if original.trailing_newline != instr.trailing_newline {
        return PreservationReport {
            ok: false,
            divergence: Some(Divergence {
                original_line: original.lines.len() as u32,
                expected: None,
                found: None,
            }),
        };
    }
    PreservationReport {
        ok: true,
        divergence: None,
    }
}

/// Collapses exact duplicates (first occurrence wins) and orders statements
/// by `(anchor_line, position)`, keeping relative order otherwise.
pub fn normalize_plan(plan: &LoggingPlan) -> LoggingPlan {
    let mut statements = Vec::with_capacity(plan.statements.len());
    for stmt in &plan.statements {
        if !statements.contains(stmt) {
            statements.push(stmt.clone());
        }
    }
    statements.sort_by_key(|s| (s.anchor_line, s.position));
    LoggingPlan {
        plan_id: plan.plan_id.clone(),
        revision: plan.revision,
        statements,
    }
}

fn leading_whitespace(line: &str) -> &str {
    let end = line
        .find(|c: char| c != ' ' && c != '\t')
        .unwrap_or(line.len());
    &line[..end]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LoggingStatement, Position, Severity};
    use alloc::format;

    fn src(n: usize) -> SourceUnit {
        let text: Vec<String> = (1..=n).map(|i| format!("L{i}")).collect();
        SourceUnit::from_lines("main.rs", text, true)
    }

    fn st(anchor: u32, pos: Position, name: &str) -> LoggingStatement {
        LoggingStatement::new(anchor, pos, Severity::Info, name, Vec::new())
    }

    fn plain(instr: &InstrumentedUnit, profile: &RenderProfile) -> Vec<String> {
        instr
            .rendered_lines
            .iter()
            .map(|l| match profile.parse_statement(l) {
                Ok((_, s)) => s.template,
                Err(_) => l.clone(),
            })
            .collect()
    }

    #[test]
    fn inserts_before_anchors() {
        let p = RenderProfile::rust();
        let plan = LoggingPlan::with_statements(
            "p",
            0,
            vec![st(2, Position::Before, "S_a"), st(4, Position::Before, "S_b")],
        );
        let instr = apply_plan(&src(4), &plan, &p).unwrap();
        assert_eq!(plain(&instr, &p), ["L1", "S_a", "L2", "L3", "S_b", "L4"]);
        assert_eq!(instr.line_map, [1, 3, 4, 6]);
    }

    #[test]
    fn empty_plan_is_identity() {
        let p = RenderProfile::rust();
        let s = src(3);
        let instr = apply_plan(&s, &LoggingPlan::new("p"), &p).unwrap();
        assert_eq!(instr.rendered_lines, s.lines);
        assert_eq!(instr.line_map, [1, 2, 3]);
        let (back, plan) = strip_plan(&instr, &p).unwrap();
        assert_eq!(back, s);
        assert!(plan.is_empty());
    }

    #[test]
    fn same_anchor_keeps_order() {
        let p = RenderProfile::rust();
        let plan = LoggingPlan::with_statements(
            "p",
            0,
            vec![st(2, Position::Before, "S_a"), st(2, Position::Before, "S_b")],
        );
        let instr = apply_plan(&src(3), &plan, &p).unwrap();
        assert_eq!(plain(&instr, &p), ["L1", "S_a", "S_b", "L2", "L3"]);
    }

    #[test]
    fn after_goes_below_anchor() {
        let p = RenderProfile::rust();
        let plan = LoggingPlan::with_statements("p", 0, vec![st(3, Position::After, "S")]);
        let instr = apply_plan(&src(3), &plan, &p).unwrap();
        assert_eq!(plain(&instr, &p), ["L1", "L2", "L3", "S"]);
    }

    #[test]
    fn anchor_past_end_is_rejected() {
        let p = RenderProfile::rust();
        let plan = LoggingPlan::with_statements("p", 0, vec![st(5, Position::Before, "S")]);
        assert_eq!(
            apply_plan(&src(4), &plan, &p),
            Err(InstrumentError::AnchorOutOfRange(5))
        );
    }

    #[test]
    fn removed_marker_is_corruption() {
        let p = RenderProfile::rust();
        let plan = LoggingPlan::with_statements("p", 1, vec![st(2, Position::Before, "S")]);
        let mut instr = apply_plan(&src(3), &plan, &p).unwrap();
        let line = &mut instr.rendered_lines[1];
        let cut = line.find(" /*RELOG").unwrap();
        line.truncate(cut);
        assert!(matches!(
            strip_plan(&instr, &p),
            Err(InstrumentError::MarkerCorruption { line: 2, .. })
        ));
    }

    #[test]
    fn strip_returns_exact_plan_order() {
        let p = RenderProfile::rust();
        let plan = LoggingPlan::with_statements(
            "p",
            4,
            vec![st(2, Position::After, "A"), st(2, Position::Before, "B"), st(1, Position::Before, "C")],
        );
        let s = src(3);
        let instr = apply_plan(&s, &plan, &p).unwrap();
        let (back_src, back_plan) = strip_plan(&instr, &p).unwrap();
        assert_eq!(back_src, s);
        assert_eq!(back_plan, plan);
    }

    #[test]
    fn source_with_marker_is_rejected() {
        let p = RenderProfile::rust();
        let s = SourceUnit::from_text("a.rs", "x(); /*RELOG:q:0:b1*/\n");
        assert_eq!(
            apply_plan(&s, &LoggingPlan::new("p"), &p),
            Err(InstrumentError::SourceContainsMarker(1))
        );
    }

    #[test]
    fn preservation_detects_deleted_and_added_lines() {
        let p = RenderProfile::rust();
        let s = src(4);
        let plan = LoggingPlan::with_statements("p", 0, vec![st(2, Position::Before, "S")]);
        let good = apply_plan(&s, &plan, &p).unwrap();
        assert!(verify_logic_preserved(&s, &good, &p).ok);

        let mut deleted = good.clone();
        deleted.rendered_lines.remove(3); // L3
        let report = verify_logic_preserved(&s, &deleted, &p);
        assert!(!report.ok);
        assert_eq!(report.divergence.unwrap().original_line, 3);

        let mut added = good.clone();
        added.rendered_lines.insert(0, "let sneaky = 1;".into());
        let report = verify_logic_preserved(&s, &added, &p);
        assert!(!report.ok);
        assert_eq!(report.divergence.unwrap().original_line, 1);
    }

    #[test]
    fn normalize_dedupes_sorts_and_is_idempotent() {
        let plan = LoggingPlan::with_statements(
            "p",
            3,
            vec![st(5, Position::Before, "X"), st(2, Position::Before, "Y"), st(5, Position::Before, "X")],
        );
        let n = normalize_plan(&plan);
        assert_eq!(n.revision, 3);
        assert_eq!(
            n.statements.iter().map(|s| s.anchor_line).collect::<Vec<_>>(),
            [2, 5]
        );
        assert_eq!(normalize_plan(&n), n);
    }

    #[test]
    fn crlf_sources_roundtrip() {
        let p = RenderProfile::rust();
        let s = SourceUnit::from_text("w.rs", "a\r\n  b\r\nc\r\n");
        let plan = LoggingPlan::with_statements("p", 0, vec![st(2, Position::After, "S")]);
        let instr = apply_plan(&s, &plan, &p).unwrap();
        assert!(instr.rendered_lines[2].ends_with("*/\r"));
        assert!(verify_logic_preserved(&s, &instr, &p).ok);
        assert_eq!(strip_plan(&instr, &p).unwrap(), (s, plan));
    }
}
