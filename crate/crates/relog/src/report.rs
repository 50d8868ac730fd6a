//! Human-readable trace of a run, rendered from its ledger alone.

use std::fmt::Write;

use relog_core::{LoggingPlan, LoggingStatement};
use similar::{ChangeTag, TextDiff};

use crate::pipeline::ledger::{IterationRecord, RunLedger};
use crate::toolchain::{CompileResult, ExecutionOutcome};

fn statement_line(s: &LoggingStatement) -> String {
    let vars = if s.variables.is_empty() { String::new() } else { format!(" [{}]", s.variables.join(", ")) };
    format!("{} line {} {}: {:?}{}", s.position, s.anchor_line, s.severity.as_str(), s.template, vars)
}

fn plan_lines(plan: Option<&LoggingPlan>) -> Vec<String> {
    plan.map(|p| p.statements.iter().map(statement_line).collect()).unwrap_or_default()
}

/// Unified-style diff of two plans, one statement per line.
pub fn plan_diff(old: Option<&LoggingPlan>, new: Option<&LoggingPlan>) -> String {
    let (a, b) = (plan_lines(old), plan_lines(new));
    let a: Vec<&str> = a.iter().map(String::as_str).collect();
    let b: Vec<&str> = b.iter().map(String::as_str).collect();
    let diff = TextDiff::configure().diff_slices(&a, &b);
    let mut out = String::new();
    for change in diff.iter_all_changes() {
        let sign = match change.tag() {
            ChangeTag::Equal => ' ',
            ChangeTag::Delete => '-',
            ChangeTag::Insert => '+',
        };
        let _ = writeln!(out, "{sign} {}", change.value());
    }
    out
}

fn compile_line(c: &CompileResult) -> String {
    if c.ok {
        return "ok".into();
    }
    if c.timed_out {
        return "timed out".into();
    }
    let errors: Vec<String> = c
        .diagnostics
        .iter()
        .filter(|d| d.is_error)
        .map(|d| match (d.line, d.statement) {
            (_, Some(i)) => format!("statement #{i}: {}", d.message),
            (Some(l), None) => format!("line {l}: {}", d.message),
            (None, None) => d.message.clone(),
        })
        .collect();
    if errors.is_empty() {
        "failed".into()
    } else {
        format!("failed ({})", errors.join("; "))
    }
}

fn outcome_lines(o: &ExecutionOutcome, out: &mut String) {
    let _ = write!(out, "- outcome: {}", o.status.as_str());
    if let Some(code) = o.exit_code {
        let _ = write!(out, " (exit {code})");
    }
    out.push('\n');
    if let Some(e) = &o.exception_info {
        let _ = writeln!(out, "- exception: {}: {}", e.type_name, e.message);
        for f in &e.frames {
            let line = f.line.map_or("?".to_string(), |l| l.to_string());
            let _ = writeln!(out, "  - at {}:{}", f.file, line);
        }
    }
    let failed = o.failed_tests();
    if !failed.is_empty() {
        let _ = writeln!(out, "- failed tests: {}", failed.join(", "));
    }
    let _ = writeln!(out, "- log events: {}", o.log_events.len());
    for ev in &o.log_events {
        let idx = ev.source_marker.map_or("?".to_string(), |i| i.to_string());
        let _ = writeln!(out, "  - [{}] #{} {}", ev.severity.tag(), idx, ev.message);
    }
}

fn iteration_section(rec: &IterationRecord, prev: Option<&LoggingPlan>, out: &mut String) {
    let _ = writeln!(out, "## Iteration {}\n", rec.iteration);
    if let Some(p) = &rec.probe {
        let _ = writeln!(out, "- original build: {}", compile_line(&p.compile));
        if let Some(o) = &p.outcome {
            let _ = writeln!(out, "- original outcome: {}", o.status.as_str());
        }
    }
    if let Some(e) = &rec.edits {
        let _ = writeln!(out, "- edits applied: {}", e.applied);
        for s in &e.skipped {
            let _ = writeln!(out, "  - skipped: {s}");
        }
    }
    let shown = rec.proposed_plan.as_ref().or(rec.plan.as_ref());
    if shown.is_some() {
        let _ = writeln!(out, "\nPlan changes:\n\n```diff\n{}```\n", plan_diff(prev, shown));
    }
    if let Some(c) = &rec.initial_compile {
        let _ = writeln!(out, "- compile: {}", compile_line(c));
    }
    for r in &rec.repairs {
        let _ = writeln!(out, "- repair {}: {} statement(s), compile {}", r.attempt, r.plan.len(), compile_line(&r.compile));
    }
    if !rec.repairs.is_empty() {
        if let (Some(before), Some(after)) = (&rec.proposed_plan, &rec.plan) {
            if before != after {
                let _ = writeln!(out, "\nRepaired plan:\n\n```diff\n{}```\n", plan_diff(Some(before), Some(after)));
            }
        }
    }
    if let Some(c) = &rec.compile {
        match &rec.initial_compile {
            None => {
                let _ = writeln!(out, "- compile: {}", compile_line(c));
            }
            Some(first) if first != c || !rec.repairs.is_empty() => {
                let _ = writeln!(out, "- final compile: {}", compile_line(c));
            }
            Some(_) => {}
        }
    }
    if let Some(kept) = rec.logic_preserved {
        let _ = writeln!(out, "- logic preserved: {kept}");
    }
    if let Some(o) = &rec.outcome {
        outcome_lines(o, out);
    }
    if let Some(v) = &rec.verdict {
        let _ = writeln!(
            out,
            "- verdict: traceability {}, state visibility {}, causal linkage {}",
            v.traceability, v.state_visibility, v.causal_linkage
        );
        for (k, s) in &v.extra {
            let _ = writeln!(out, "  - {k} {s}");
        }
        let _ = writeln!(out, "- sufficient: {}", v.sufficient);
        for f in &v.feedback {
            let anchor = f.target_anchor.map_or(String::new(), |a| format!(" @{a}"));
            let detail = if f.detail.is_empty() { String::new() } else { format!(": {}", f.detail) };
            let _ = writeln!(out, "  - {:?}{anchor} {}{detail}", f.action, f.subject);
        }
        if !v.rationale.is_empty() {
            let _ = writeln!(out, "- rationale: {}", v.rationale);
        }
    }
    for n in &rec.notes {
        let _ = writeln!(out, "- note: {n}");
    }
    out.push('\n');
}

/// Markdown trace of every iteration: plan diff against the previous
/// iteration, compile and repair events, outcome and verdict.
pub fn render(ledger: &RunLedger) -> String {
    let h = &ledger.header;
    let mut out = String::new();
    let _ = writeln!(out, "# Run {} on {}\n", h.plan_id, h.unit_path);
    let _ = writeln!(
        out,
        "- mode: {:?}, toolchain: {}, max iterations: {}, fix budget: {}",
        h.config.mode, h.config.toolchain, h.config.max_iterations, h.config.fix_budget
    );
    if h.config.ablate_fixer || h.config.ablate_refine {
        let _ = writeln!(out, "- ablations: fixer={} refine={}", h.config.ablate_fixer, h.config.ablate_refine);
    }
    let _ = writeln!(out, "- source digest: {}\n", h.source_digest);
    let mut prev: Option<&LoggingPlan> = None;
    for rec in &ledger.iterations {
        iteration_section(rec, prev, &mut out);
        if rec.plan.is_some() {
            prev = rec.plan.as_ref();
        }
    }
    let f = &ledger.footer;
    let _ = writeln!(out, "## Result\n");
    let _ = writeln!(out, "- termination: {}", f.termination.as_str());
    let _ = writeln!(out, "- iterations: {}", f.iterations);
    if let Some(fail) = &f.failure {
        let _ = writeln!(out, "- failure: {:?}: {}", fail.kind, fail.message);
    }
    if let Some(p) = &f.final_plan {
        let _ = writeln!(out, "- final plan: {} statement(s)", p.len());
        for s in &p.statements {
            let _ = writeln!(out, "  - {}", statement_line(s));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use relog_core::{Position, Severity};

    #[test]
    fn diff_marks_added_and_removed_statements() {
        let s = |l, t: &str| LoggingStatement::new(l, Position::Before, Severity::Info, t, vec![]);
        let a = LoggingPlan::with_statements("p", 0, vec![s(2, "a"), s(4, "b")]);
        let b = LoggingPlan::with_statements("p", 1, vec![s(2, "a"), s(5, "c")]);
        let d = plan_diff(Some(&a), Some(&b));
        assert!(d.contains("  before line 2 info: \"a\""));
        assert!(d.contains("- before line 4 info: \"b\""));
        assert!(d.contains("+ before line 5 info: \"c\""));
    }
}
