//! Judging verdicts and patches, and reducing them to metrics.

use regex::Regex;
use relog_core::{Hunk, MetricsReport, Patch, Tally};
use similar::{DiffOp, TextDiff};

use super::manifest::{BenchmarkInstance, FaultLine};
use super::InstanceResult;
use crate::gateway::Location;
use crate::pipeline::Mode;
use crate::syntax;
use crate::toolchain::{Toolchain, ToolchainError};

/// How a reported location is matched to ground truth. Printed in every
/// report header.
pub const TP_RULE: &str =
    "true positive = reported location inside the enclosing method of a fault line (same file; by line, or by method name)";

fn same_file(reported: &str, truth: &str) -> bool {
    let norm = |p: &str| p.trim_start_matches("./").to_string();
    let (r, t) = (norm(reported), norm(truth));
    r == t || r.ends_with(&format!("/{t}")) || t.ends_with(&format!("/{r}"))
}

/// True iff `location` falls inside the method that encloses one of the
/// instance's fault lines. A fault line outside any method only matches
/// itself.
pub fn tp_match(location: Option<&Location>, inst: &BenchmarkInstance, method_re: &Regex) -> bool {
    let Some(loc) = location else { return false };
    inst.fault_lines.iter().any(|fault| fault_matches(loc, fault, inst, method_re))
}

fn fault_matches(loc: &Location, fault: &FaultLine, inst: &BenchmarkInstance, method_re: &Regex) -> bool {
    // Without a file the agent can only mean the defective unit.
    let file = loc.file.as_deref().unwrap_or(&inst.defective_path);
    if !same_file(file, &fault.file) {
        return false;
    }
    let Some(unit) = inst.program.unit(&fault.file).or_else(|| {
        inst.program.units.iter().find(|u| same_file(&u.path, &fault.file))
    }) else {
        return loc.line == Some(fault.line);
    };
    let method = syntax::enclosing_method(&unit.lines, fault.line, method_re);
    if let Some(line) = loc.line {
        return match &method {
            Some(m) => m.contains(line),
            None => line == fault.line,
        };
    }
    match (&loc.method, &method) {
        (Some(name), Some(m)) => {
            let bare = name.rsplit("::").next().unwrap_or(name).trim_end_matches("()");
            bare == m.name
        }
        _ => false,
    }
}

/// Line hunks turning `old` into `new`.
pub fn diff_patch(old: &[String], new: &[String]) -> Patch {
    let a: Vec<&str> = old.iter().map(String::as_str).collect();
    let b: Vec<&str> = new.iter().map(String::as_str).collect();
    let diff = TextDiff::configure().diff_slices(&a, &b);
    let mut hunks = Vec::new();
    for op in diff.ops() {
        match *op {
            DiffOp::Equal { .. } => {}
            DiffOp::Delete { old_index, old_len, .. } => hunks.push(Hunk {
                start_line: old_index as u32 + 1,
                old_lines: old[old_index..old_index + old_len].to_vec(),
                new_lines: Vec::new(),
            }),
            DiffOp::Insert { old_index, new_index, new_len } => hunks.push(Hunk {
                start_line: old_index as u32 + 1,
                old_lines: Vec::new(),
                new_lines: new[new_index..new_index + new_len].to_vec(),
            }),
            DiffOp::Replace { old_index, old_len, new_index, new_len } => hunks.push(Hunk {
                start_line: old_index as u32 + 1,
                old_lines: old[old_index..old_index + old_len].to_vec(),
                new_lines: new[new_index..new_index + new_len].to_vec(),
            }),
        }
    }
    Patch { hunks }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairCheck {
    pub ok: bool,
    pub reason: String,
}

/// Applies `patch` to the defective unit and reruns the tests. Succeeds iff
/// the result builds and every failing and regression test passes.
pub fn validate_repair(inst: &BenchmarkInstance, patch: &Patch, toolchain: &Toolchain) -> Result<RepairCheck, ToolchainError> {
    let unit = inst.defective_unit();
    let lines = match patch.apply(&unit.lines) {
        Ok(l) => l,
        Err(e) => return Ok(RepairCheck { ok: false, reason: format!("patch does not apply: {e}") }),
    };
    let patched = relog_core::SourceUnit::from_lines(unit.path.clone(), lines, unit.trailing_newline);
    let (compile, outcome) = toolchain.build_and_run(&inst.program.with_unit(patched), None)?;
    let Some(outcome) = outcome.filter(|_| compile.ok) else {
        return Ok(RepairCheck { ok: false, reason: "patched program does not build".into() });
    };
    if inst.all_tests_pass(&outcome) {
        Ok(RepairCheck { ok: true, reason: "all tests pass".into() })
    } else {
        Ok(RepairCheck { ok: false, reason: format!("tests fail: {:?}", outcome.failed_tests()) })
    }
}

/// Metrics over the results of one mode. `avg_logs` is final-plan
/// statements per method of the instrumented unit in direct mode and per
/// caller in indirect mode.
pub fn compute_metrics(results: &[&InstanceResult], mode: Mode) -> MetricsReport {
    let mut tally = Tally::default();
    let mut logs = 0.0;
    let mut events = 0.0;
    for r in results {
        tally.total += 1;
        if r.compile_failed {
            tally.compilation_failures += 1;
        }
        if r.detected {
            tally.detected_defects += 1;
        }
        if r.true_positive {
            tally.true_positives += 1;
        }
        if r.repaired == Some(true) {
            tally.successful_repairs += 1;
        }
        logs += r.plan_statements as f64 / r.instrumented_scopes.max(1) as f64;
        events += r.events as f64;
    }
    let n = results.len().max(1) as f64;
    MetricsReport::from_tally(tally, mode == Mode::Direct, logs / n, events / n)
        .expect("true positives are a subset of detections")
}

/// Markdown table with the usual column order.
pub fn render_table(rows: &[(String, Mode, &MetricsReport)]) -> String {
    let mut out = String::new();
    for mode in [Mode::Direct, Mode::Indirect] {
        let these: Vec<_> = rows.iter().filter(|r| r.1 == mode).collect();
        if these.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        match mode {
            Mode::Direct => {
                out.push_str("| Direct | Compilation Failures | Detected Defects | True Positives | Precision | Recall | F1 Score | Successful Repairs | Avg. Logs |\n");
                out.push_str("|---|---|---|---|---|---|---|---|---|\n");
            }
            Mode::Indirect => {
                out.push_str("| Indirect | Compilation Failures | Detected Defects | True Positives | Precision | Recall | F1 Score | Avg. Logs per Caller |\n");
                out.push_str("|---|---|---|---|---|---|---|---|\n");
            }
        }
        for (name, _, m) in these {
            out.push_str(&format!(
                "| {name} | {} | {} | {} | {:.3} | {:.3} | {:.3} |",
                m.compilation_failures, m.detected_defects, m.true_positives, m.precision, m.recall, m.f1
            ));
            if mode == Mode::Direct {
                out.push_str(&format!(" {} |", m.successful_repairs.unwrap_or(0)));
            }
            out.push_str(&format!(" {:.2} |\n", m.avg_logs));
        }
    }
    out
}
