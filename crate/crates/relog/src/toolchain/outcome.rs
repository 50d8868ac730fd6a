//! Execution outcomes and runtime log events.

use relog_core::Severity;
use serde::{Deserialize, Serialize};

use super::mapping::LineMapper;
use super::process::ProcessOutput;
use crate::profile::CompiledRules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Pass,
    TestFailure,
    Exception,
    Timeout,
    Crash,
}

impl OutcomeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::TestFailure => "test_failure",
            Self::Exception => "exception",
            Self::Timeout => "timeout",
            Self::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub file: String,
    /// Original line; `None` if the frame points at a line that cannot be mapped.
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionInfo {
    pub type_name: String,
    pub message: String,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub severity: Severity,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_marker: Option<usize>,
    pub sequence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: OutcomeStatus,
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exception_info: Option<ExceptionInfo>,
    pub stdout: String,
    pub stderr: String,
    #[serde(default)]
    pub stdout_truncated: bool,
    #[serde(default)]
    pub stderr_truncated: bool,
    pub log_events: Vec<LogEvent>,
    #[serde(default)]
    pub test_results: Vec<TestResult>,
    /// Not serialized: ledgers must not depend on timing.
    #[serde(skip)]
    pub wall_time_ms: u64,
}

impl ExecutionOutcome {
    pub fn failed_tests(&self) -> Vec<&str> {
        self.test_results.iter().filter(|t| !t.passed).map(|t| t.name.as_str()).collect()
    }

    pub fn test_passed(&self, name: &str) -> Option<bool> {
        self.test_results.iter().find(|t| t.name == name).map(|t| t.passed)
    }
}

/// Turns every line that starts with `marker` into a [`LogEvent`].
///
/// The expected shape after the marker is `<TAG> #<index> <message>`; lines
/// that deviate keep their whole remainder as the message.
pub fn extract_log_events(text: &str, marker: &str) -> Vec<LogEvent> {
    let mut events = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix(marker) else { continue };
        if !(rest.is_empty() || rest.starts_with(' ')) {
            continue;
        }
        let rest = rest.trim_start();
        let (severity, source_marker, message) = parse_event_body(rest)
            .unwrap_or((Severity::Info, None, rest));
        events.push(LogEvent {
            severity,
            message: message.to_string(),
            source_marker,
            sequence: events.len() as u32 + 1,
        });
    }
    events
}

fn parse_event_body(rest: &str) -> Option<(Severity, Option<usize>, &str)> {
    let (tag, tail) = rest.split_once(' ').unwrap_or((rest, ""));
    let severity: Severity = tag.to_ascii_lowercase().parse().ok()?;
    if let Some(idx_tail) = tail.strip_prefix('#') {
        let (digits, message) = idx_tail.split_once(' ').unwrap_or((idx_tail, ""));
        if let Ok(index) = digits.parse::<usize>() {
            return Some((severity, Some(index), message));
        }
    }
    Some((severity, None, tail))
}

fn find_exception(text: &str, rules: &CompiledRules, mapper: &LineMapper<'_>) -> Option<ExceptionInfo> {
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        for rule in &rules.exceptions {
            let Some(caps) = rule.header.captures(line) else { continue };
            let type_name = caps
                .name("type")
                .map(|m| m.as_str().to_string())
                .or_else(|| rule.default_type.clone())
                .unwrap_or_else(|| "exception".into());
            let message = match caps.name("message") {
                Some(m) => m.as_str().to_string(),
                None if rule.message_next_line => lines.get(i + 1).map(|s| s.to_string()).unwrap_or_default(),
                None => String::new(),
            };
            let frame = |file: &str, line: &str| {
                line.parse::<u32>().ok().map(|n| {
                    let mapped = mapper.map(file, n);
                    Frame { file: mapper.normalize(file), line: mapped.line, statement: mapped.statement }
                })
            };
            let mut frames = Vec::new();
            if let (Some(f), Some(l)) = (caps.name("file"), caps.name("line")) {
                frames.extend(frame(f.as_str(), l.as_str()));
            }
            if let Some(frame_re) = &rule.frame {
                for next in lines.iter().skip(i + 1) {
                    match frame_re.captures(next) {
                        Some(fc) => {
                            if let (Some(f), Some(l)) = (fc.name("file"), fc.name("line")) {
                                frames.extend(frame(f.as_str(), l.as_str()));
                            }
                        }
                        None if rule.message_next_line && frames.is_empty() => continue,
                        None => break,
                    }
                }
            }
            return Some(ExceptionInfo { type_name, message, frames });
        }
    }
    None
}

fn test_results(text: &str, rules: &CompiledRules) -> Vec<TestResult> {
    let Some((re, pass)) = &rules.test_report else { return Vec::new() };
    text.lines()
        .filter_map(|l| re.captures(l))
        .filter_map(|c| {
            Some(TestResult {
                name: c.name("name")?.as_str().to_string(),
                passed: c.name("status")?.as_str() == pass,
            })
        })
        .collect()
}

/// Classifies a finished process. First match wins: timeout, exception,
/// reported test failures, nonzero exit, pass.
pub fn classify(out: ProcessOutput, rules: &CompiledRules, mapper: &LineMapper<'_>, marker: &str) -> ExecutionOutcome {
    let stdout = rules.scrub(&out.stdout.text);
    let stderr = rules.scrub(&out.stderr.text);
    let exception_info = if out.timed_out {
        None
    } else {
        find_exception(&stderr, rules, mapper).or_else(|| find_exception(&stdout, rules, mapper))
    };
    let mut tests = test_results(&stdout, rules);
    tests.extend(test_results(&stderr, rules));
    let status = if out.timed_out {
        OutcomeStatus::Timeout
    } else if exception_info.is_some() {
        OutcomeStatus::Exception
    } else if tests.iter().any(|t| !t.passed) {
        OutcomeStatus::TestFailure
    } else if out.exit_code != Some(0) {
        OutcomeStatus::Crash
    } else {
        OutcomeStatus::Pass
    };
    let mut log_events = extract_log_events(&stderr, marker);
    let offset = log_events.len() as u32;
    log_events.extend(extract_log_events(&stdout, marker).into_iter().map(|mut e| {
        e.sequence += offset;
        e
    }));
    ExecutionOutcome {
        status,
        exit_code: if out.timed_out { None } else { out.exit_code },
        exception_info,
        stdout,
        stderr,
        stdout_truncated: out.stdout.truncated,
        stderr_truncated: out.stderr.truncated,
        log_events,
        test_results: tests,
        wall_time_ms: out.wall_time_ms,
    }
}
