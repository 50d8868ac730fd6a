//! Run ledger: one JSON line for the header, one per iteration, one footer.

use std::path::Path;

use relog_core::digest::sha256_hex;
use relog_core::{CriticVerdict, LoggingPlan, Rubric, SufficiencyRule};
use serde::{Deserialize, Serialize};

use crate::gateway::CallRecord;
use crate::toolchain::{CompileResult, ExecutionOutcome};

pub const LEDGER_FORMAT: &str = "relog-ledger/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Sufficient,
    BudgetExhausted,
    CompileFailed,
    ExecutionError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sufficient => "sufficient",
            Self::BudgetExhausted => "budget_exhausted",
            Self::CompileFailed => "compile_failed",
            Self::ExecutionError => "execution_error",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Direct,
    Indirect,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "indirect" => Ok(Self::Indirect),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub max_iterations: u32,
    pub fix_budget: u32,
    pub retry_limit: u32,
    pub ablate_fixer: bool,
    pub ablate_refine: bool,
    pub mode: Mode,
    pub goal: String,
    pub rubric: Rubric,
    pub rule: SufficiencyRule,
    pub toolchain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub format: String,
    pub unit_path: String,
    pub source_digest: String,
    pub plan_id: String,
    pub config: ConfigSnapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub compile: CompileResult,
    pub outcome: Option<ExecutionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairStep {
    pub attempt: u32,
    pub plan: LoggingPlan,
    pub compile: CompileResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSummary {
    pub applied: usize,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edits: Option<EditSummary>,
    /// Plan as produced by generation or refinement, before any repair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_plan: Option<LoggingPlan>,
    /// Plan that was finally built (and executed, when it compiled).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<LoggingPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_compile: Option<CompileResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repairs: Vec<RepairStep>,
    pub fix_attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic_preserved: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<ExecutionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<CriticVerdict>,
    #[serde(default)]
    pub calls: Vec<CallRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IterationRecord {
    pub fn new(iteration: u32) -> Self {
        Self {
            iteration,
            probe: None,
            edits: None,
            proposed_plan: None,
            plan: None,
            initial_compile: None,
            repairs: Vec::new(),
            fix_attempts: 0,
            compile: None,
            logic_preserved: None,
            outcome: None,
            verdict: None,
            calls: Vec::new(),
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    ToolchainUnavailable,
    Toolchain,
    PristineBuildFailed,
    Gateway,
    ReplayMiss,
    Instrumentation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerFooter {
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    pub iterations: u32,
    pub final_plan: Option<LoggingPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line {
    Header(LedgerHeader),
    Iteration(Box<IterationRecord>),
    Footer(LedgerFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLedger {
    pub header: LedgerHeader,
    pub iterations: Vec<IterationRecord>,
    pub footer: LedgerFooter,
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger io: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl RunLedger {
    pub fn termination(&self) -> Termination {
        self.footer.termination
    }

    pub fn last_outcome(&self) -> Option<&ExecutionOutcome> {
        self.iterations.iter().rev().find_map(|r| r.outcome.as_ref())
    }

    pub fn last_verdict(&self) -> Option<&CriticVerdict> {
        self.iterations.iter().rev().find_map(|r| r.verdict.as_ref())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |l: Line| {
            out.push_str(&serde_json::to_string(&l).expect("ledger serializes"));
            out.push('\n');
        };
        push(Line::Header(self.header.clone()));
        for r in &self.iterations {
            push(Line::Iteration(Box::new(r.clone())));
        }
        push(Line::Footer(self.footer.clone()));
        out
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_jsonl().as_bytes())
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LedgerError> {
        let mut header = None;
        let mut iterations = Vec::new();
        let mut footer = None;
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line: Line = serde_json::from_str(raw).map_err(|e| LedgerError::Parse { line: i + 1, message: e.to_string() })?;
            match line {
                Line::Header(h) => header = Some(h),
                Line::Iteration(r) => iterations.push(*r),
                Line::Footer(f) => footer = Some(f),
            }
        }
        let missing = |what: &str| LedgerError::Parse { line: 0, message: format!("missing {what}") };
        Ok(Self { header: header.ok_or_else(|| missing("header"))?, iterations, footer: footer.ok_or_else(|| missing("footer"))? })
    }

    pub fn write(&self, path: &Path) -> Result<(), LedgerError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, LedgerError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}
