//! Downstream debugging evaluation: collect logs with some generator, hand
//! them to a debugging agent, score the verdicts.

pub mod agent;
pub mod manifest;
pub mod scoring;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use regex::Regex;
use relog_core::{apply_plan, LoggingPlan, MetricsReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::gateway::DebugVerdict;
use crate::pipeline::{run_loop, FailureKind, Mode, RunLedger, Subject, Termination};
use crate::toolchain::{ExecutionOutcome, Toolchain, ToolchainError};

pub use agent::{debug_envelope, run_debug_agent, AgentAnswer, Evidence};
pub use manifest::{load_benchmark, Benchmark, BenchmarkInstance, Excluded, FaultLine, Manifest, ValidationCache};
pub use scoring::{compute_metrics, diff_patch, render_table, tp_match, validate_repair, RepairCheck, TP_RULE};

pub const AVG_LOGS_RULE: &str =
    "avg logs = final-plan statements per method of the instrumented unit (direct) or per instrumented caller (indirect)";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
    #[error("{0}")]
    ToolchainUnavailable(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Where the logs handed to the agent come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    /// The closed loop, with whatever ablations the config sets.
    Relog,
    /// No logging at all: the agent sees the pristine run only.
    None,
    /// Externally produced plans, `<dir>/<instance_id>.json` each.
    PlanFile(PathBuf),
}

impl Generator {
    pub fn label(&self, config: &RunConfig) -> String {
        match self {
            Self::Relog if config.ablate_fixer && config.ablate_refine => "relog w/o fixer, w/o refine".into(),
            Self::Relog if config.ablate_fixer => "relog w/o fixer".into(),
            Self::Relog if config.ablate_refine => "relog w/o refine".into(),
            Self::Relog => "relog".into(),
            Self::None => "no logging".into(),
            Self::PlanFile(_) => "plan files".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance_id: String,
    pub mode: Mode,
    #[serde(default)]
    pub termination: Option<Termination>,
    pub compile_failed: bool,
    pub plan_statements: usize,
    /// Divisor for the per-unit log count.
    pub instrumented_scopes: usize,
    pub events: usize,
    pub verdict: DebugVerdict,
    pub detected: bool,
    pub true_positive: bool,
    #[serde(default)]
    pub repaired: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default)]
    pub ledger_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub generator: String,
    pub tp_rule: String,
    pub avg_logs_rule: String,
    pub direct: Option<MetricsReport>,
    pub indirect: Option<MetricsReport>,
    pub excluded: Vec<Excluded>,
    pub instances: Vec<InstanceResult>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut rows = Vec::new();
        if let Some(m) = &self.direct {
            rows.push((self.generator.clone(), Mode::Direct, m));
        }
        if let Some(m) = &self.indirect {
            rows.push((self.generator.clone(), Mode::Indirect, m));
        }
        format!("{}\n{}\n\n{}", self.tp_rule, self.avg_logs_rule, render_table(&rows))
    }

    pub fn result(&self, instance_id: &str) -> Option<&InstanceResult> {
        self.instances.iter().find(|r| r.instance_id == instance_id)
    }
}

/// What the agent gets to see for one instance, as collected by a
/// generator.
struct Collected {
    plan: LoggingPlan,
    outcome: Option<ExecutionOutcome>,
    compile_failed: bool,
    termination: Option<Termination>,
    ledger: Option<RunLedger>,
    notes: Vec<String>,
}

pub struct Evaluator<'a> {
    pub config: &'a RunConfig,
    pub toolchain: &'a Toolchain,
    pub generator: Generator,
    /// Ledgers of loop runs are written here when set.
    pub ledger_dir: Option<PathBuf>,
    method_re: Regex,
}

impl<'a> Evaluator<'a> {
    pub fn new(config: &'a RunConfig, toolchain: &'a Toolchain, generator: Generator) -> Result<Self, EvalError> {
        let method_re = Regex::new(&toolchain.profile.render.method_pattern)
            .map_err(|e| EvalError::Config(ConfigError::Invalid(format!("method pattern: {e}"))))?;
        Ok(Self { config, toolchain, generator, ledger_dir: None, method_re })
    }

    pub fn with_ledger_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.ledger_dir = Some(dir.into());
        self
    }

    fn collect(&self, inst: &BenchmarkInstance, gateway: &crate::gateway::Gateway) -> Result<Collected, EvalError> {
        match &self.generator {
            Generator::Relog => {
                let subject = Subject { program: inst.program.clone(), target: inst.target().to_string(), mode: inst.mode };
                let ledger = run_loop(&subject, self.toolchain, gateway, &self.config.loop_config());
                if let Some(f) = &ledger.footer.failure {
                    if f.kind == FailureKind::ToolchainUnavailable {
                        return Err(EvalError::ToolchainUnavailable(f.message.clone()));
                    }
                }
                let executed = ledger.iterations.iter().rev().find(|r| r.outcome.is_some());
                let termination = ledger.termination();
                let compile_failed = termination == Termination::CompileFailed;
                let (plan, outcome) = match executed {
                    Some(r) if !compile_failed => (r.plan.clone().unwrap_or_else(|| LoggingPlan::new("empty")), r.outcome.clone()),
                    _ => (ledger.footer.final_plan.clone().unwrap_or_else(|| LoggingPlan::new("empty")), None),
                };
                let mut notes = Vec::new();
                if let Some(f) = &ledger.footer.failure {
                    notes.push(format!("{:?}: {}", f.kind, f.message));
                }
                Ok(Collected { plan, outcome, compile_failed, termination: Some(termination), ledger: Some(ledger), notes })
            }
            Generator::None => {
                let (compile, outcome) = self.toolchain.build_and_run(&inst.program, None)?;
                let notes = if compile.ok { Vec::new() } else { vec!["pristine build failed".into()] };
                Ok(Collected { plan: LoggingPlan::new("none"), outcome, compile_failed: false, termination: None, ledger: None, notes })
            }
            Generator::PlanFile(dir) => {
                let path = dir.join(format!("{}.json", inst.instance_id));
                let mut notes = Vec::new();
                let plan: LoggingPlan = match std::fs::read_to_string(&path) {
                    Ok(t) => serde_json::from_str(&t)
                        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?,
                    Err(_) => {
                        notes.push(format!("no plan at {}", path.display()));
                        LoggingPlan::new("missing")
                    }
                };
                let unit = inst.program.unit(inst.target()).expect("target unit is loaded");
                let instrumented = match apply_plan(unit, &plan, &self.toolchain.profile.render) {
                    Ok(i) => i,
                    Err(e) => {
                        notes.push(format!("plan does not apply: {e}"));
                        return Ok(Collected { plan, outcome: None, compile_failed: true, termination: None, ledger: None, notes });
                    }
                };
                let (compile, outcome) = self.toolchain.build_and_run(&inst.program, Some(&instrumented))?;
                Ok(Collected { plan, outcome, compile_failed: !compile.ok, termination: None, ledger: None, notes })
            }
        }
    }

    /// Collects logs for one instance, asks the agent and scores the answer.
    pub fn evaluate(&self, inst: &BenchmarkInstance) -> Result<InstanceResult, EvalError> {
        let gateway = self.config.gateway(&inst.stub, &self.toolchain.profile)?;
        let c = self.collect(inst, &gateway)?;
        let mut notes = c.notes;
        let ledger_digest = match &c.ledger {
            Some(l) => {
                if let Some(dir) = &self.ledger_dir {
                    l.write(&dir.join(format!("{}.jsonl", inst.instance_id)))
                        .map_err(|e| EvalError::Io(e.to_string()))?;
                }
                Some(l.digest())
            }
            None => None,
        };
        let scopes = match inst.mode {
            Mode::Direct => {
                crate::syntax::method_spans(&inst.defective_unit().lines, &self.method_re).len().max(1)
            }
            Mode::Indirect => 1,
        };
        let mut result = InstanceResult {
            instance_id: inst.instance_id.clone(),
            mode: inst.mode,
            termination: c.termination,
            compile_failed: c.compile_failed,
            plan_statements: c.plan.len(),
            instrumented_scopes: scopes,
            events: 0,
            verdict: DebugVerdict::not_detected("no analyzable execution"),
            detected: false,
            true_positive: false,
            repaired: None,
            notes: Vec::new(),
            ledger_digest,
        };
        let Some(outcome) = c.outcome.filter(|_| !c.compile_failed) else {
            result.notes = notes;
            return Ok(result);
        };
        result.events = outcome.log_events.len();
        let ev = Evidence { plan: &c.plan, events: &outcome.log_events, outcome: &outcome };
        let answer = run_debug_agent(inst, &ev, &gateway, &self.toolchain.profile.log_marker);
        if let Some(e) = answer.error {
            notes.push(format!("agent: {e}"));
        }
        result.detected = answer.verdict.defect_reported;
        result.true_positive =
            result.detected && inst.defective && tp_match(answer.verdict.location.as_ref(), inst, &self.method_re);
        if inst.mode == Mode::Direct {
            result.repaired = Some(match answer.verdict.patch.as_ref().filter(|_| result.detected) {
                Some(p) => {
                    let check = validate_repair(inst, p, self.toolchain)?;
                    notes.push(format!("repair: {}", check.reason));
                    check.ok
                }
                None => false,
            });
        }
        result.verdict = answer.verdict;
        result.notes = notes;
        Ok(result)
    }

    /// Evaluates every instance, `config.jobs` at a time, and reduces the
    /// results per mode.
    pub fn run(&self, bench: &Benchmark) -> Result<EvalReport, EvalError> {
        let n = bench.instances.len();
        let slots: Vec<Mutex<Option<Result<InstanceResult, EvalError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let jobs = self.config.jobs.clamp(1, n.max(1));
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let r = self.evaluate(&bench.instances[i]);
                    *slots[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        let mut instances = Vec::with_capacity(n);
        for slot in slots {
            instances.push(slot.into_inner().expect("result slot").expect("every instance evaluated")?);
        }
        let of = |mode: Mode| {
            let rs: Vec<&InstanceResult> = instances.iter().filter(|r| r.mode == mode).collect();
            (!rs.is_empty()).then(|| compute_metrics(&rs, mode))
        };
        Ok(EvalReport {
            generator: self.generator.label(self.config),
            tp_rule: TP_RULE.into(),
            avg_logs_rule: AVG_LOGS_RULE.into(),
            direct: of(Mode::Direct),
            indirect: of(Mode::Indirect),
            excluded: bench.excluded.clone(),
            instances,
        })
    }
}

/// Writes `report.json` and `report.md` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report).expect("report serializes"))?;
    std::fs::write(dir.join("report.md"), report.table())
}
