//! Compiler diagnostics.

use serde::{Deserialize, Serialize};

use super::mapping::LineMapper;
use crate::profile::CompiledRules;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilerDiagnostic {
    /// Workspace-relative file.
    pub file: String,
    /// Line in original coordinates. A diagnostic on a plan line reports the
    /// statement's anchor.
    pub line: Option<u32>,
    /// Line as reported by the tool.
    pub rendered_line: u32,
    pub severity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    pub message: String,
    /// Index of the plan statement rendered on the reported line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<usize>,
    pub raw: String,
    pub is_error: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub ok: bool,
    pub diagnostics: Vec<CompilerDiagnostic>,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    /// Compiler output, scrubbed and capped. Kept for prompts when no rule
    /// matched anything.
    #[serde(default)]
    pub output: String,
}

impl CompileResult {
    pub fn trivial() -> Self {
        Self { ok: true, diagnostics: Vec::new(), timed_out: false, exit_code: Some(0), output: String::new() }
    }

    pub fn errors(&self) -> impl Iterator<Item = &CompilerDiagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error)
    }

    /// Statement indices blamed by at least one error.
    pub fn blamed_statements(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.errors().filter_map(|d| d.statement).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn parse_diagnostics(output: &str, rules: &CompiledRules, mapper: &LineMapper<'_>) -> Vec<CompilerDiagnostic> {
    let mut out = Vec::new();
    for raw in output.lines() {
        for (re, error_levels) in &rules.diagnostics {
            let Some(caps) = re.captures(raw) else { continue };
            let (Some(file), Some(line)) = (caps.name("file"), caps.name("line")) else { continue };
            let Ok(rendered_line) = line.as_str().parse::<u32>() else { continue };
            let severity = caps.name("severity").map(|m| m.as_str().to_string());
            let is_error = severity.as_ref().is_none_or(|s| error_levels.iter().any(|e| e == s));
            let mapped = mapper.map(file.as_str(), rendered_line);
            out.push(CompilerDiagnostic {
                file: mapper.normalize(file.as_str()),
                line: mapped.line,
                rendered_line,
                severity: severity.unwrap_or_else(|| "error".into()),
                code: caps.name("code").map(|m| m.as_str().to_string()),
                message: caps.name("message").map(|m| m.as_str().to_string()).unwrap_or_default(),
                statement: mapped.statement,
                raw: raw.to_string(),
                is_error,
            });
            break;
        }
    }
    out
}
