//! Bounded, deterministic digests of outcomes and diagnostics for prompts.

use serde::{Deserialize, Serialize};

use crate::toolchain::{CompileResult, ExecutionOutcome, Frame, LogEvent, OutcomeStatus};

pub const MAX_FRAMES: usize = 3;
pub const MAX_EVENTS: usize = 50;
pub const MAX_TAIL_CHARS: usize = 2000;
pub const MAX_DIAGNOSTICS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionSummary {
    pub type_name: String,
    pub message: String,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub status: OutcomeStatus,
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub exception: Option<ExceptionSummary>,
    #[serde(default)]
    pub failed_tests: Vec<String>,
    pub events_total: usize,
    /// The last [`MAX_EVENTS`] events.
    pub events: Vec<LogEvent>,
    /// Non-log output, tail-truncated.
    pub stdout_tail: String,
    pub stderr_tail: String,
    pub truncated: bool,
}

fn tail(text: &str, marker: &str) -> (String, bool) {
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with(marker)).collect();
    let joined = kept.join("\n");
    let count = joined.chars().count();
    if count <= MAX_TAIL_CHARS {
        return (joined, false);
    }
    (joined.chars().skip(count - MAX_TAIL_CHARS).collect(), true)
}

impl OutcomeSummary {
    pub fn of(outcome: &ExecutionOutcome, marker: &str) -> Self {
        let (stdout_tail, t1) = tail(&outcome.stdout, marker);
        let (stderr_tail, t2) = tail(&outcome.stderr, marker);
        let skip = outcome.log_events.len().saturating_sub(MAX_EVENTS);
        Self {
            status: outcome.status,
            exit_code: outcome.exit_code,
            exception: outcome.exception_info.as_ref().map(|e| ExceptionSummary {
                type_name: e.type_name.clone(),
                message: e.message.clone(),
                frames: e.frames.iter().take(MAX_FRAMES).cloned().collect(),
            }),
            failed_tests: outcome.failed_tests().into_iter().map(str::to_string).collect(),
            events_total: outcome.log_events.len(),
            events: outcome.log_events[skip..].to_vec(),
            stdout_tail,
            stderr_tail,
            truncated: t1 || t2 || skip > 0 || outcome.stdout_truncated || outcome.stderr_truncated,
        }
    }

    pub fn to_slot(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub line: Option<u32>,
    #[serde(default)]
    pub statement: Option<usize>,
    #[serde(default)]
    pub code: Option<String>,
    pub message: String,
}

/// Error diagnostics as shown to the fixer. Falls back to the raw output
/// tail when no diagnostic rule matched.
pub fn diagnostics_slot(compile: &CompileResult) -> String {
    let diags: Vec<DiagnosticSummary> = compile
        .errors()
        .take(MAX_DIAGNOSTICS)
        .map(|d| DiagnosticSummary {
            line: d.line,
            statement: d.statement,
            code: d.code.clone(),
            message: d.message.clone(),
        })
        .collect();
    if diags.is_empty() {
        let (t, _) = tail(&compile.output, "\u{0}");
        return serde_json::to_string_pretty(&serde_json::json!({ "unparsed_output": t })).expect("serializes");
    }
    serde_json::to_string_pretty(&diags).expect("serializes")
}

pub fn events_slot(events: &[LogEvent]) -> String {
    let skip = events.len().saturating_sub(MAX_EVENTS);
    serde_json::to_string_pretty(&events[skip..]).expect("serializes")
}
