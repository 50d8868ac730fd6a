//! The closed loop: generate a plan, make it compile, run it, judge the
//! logs, refine, repeat.
//!
//! Only the plan ever changes. Every build re-inserts the current plan into
//! the pristine source, so a bad statement can never leak into the next
//! attempt.

pub mod ledger;

use relog_core::{
    apply_edits, apply_plan, normalize_plan, verify_logic_preserved, CriticVerdict, FeedbackAction,
    FeedbackItem, InstrumentedUnit, LoggingPlan, Rubric, SourceUnit, SufficiencyRule,
};

use crate::gateway::{templates, CallRecord, EditList, Gateway, GatewayError, PromptEnvelope, Schema};
use crate::summary::{diagnostics_slot, OutcomeSummary};
use crate::syntax::numbered;
use crate::toolchain::{CompileResult, ExecutionOutcome, OutcomeStatus, Program, Toolchain, ToolchainError, Workspace};

pub use ledger::{
    ConfigSnapshot, EditSummary, Failure, FailureKind, IterationRecord, LedgerFooter, LedgerHeader, Mode,
    ProbeRecord, RepairStep, RunLedger, Termination,
};

pub const DEFAULT_MAX_ITERATIONS: u32 = 5;
pub const DEFAULT_FIX_BUDGET: u32 = 3;
pub const DEFAULT_GOAL: &str = "locating the defect behind the failing behaviour";

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub max_iterations: u32,
    pub fix_budget: u32,
    pub ablate_fixer: bool,
    pub ablate_refine: bool,
    pub rubric: Rubric,
    pub rule: SufficiencyRule,
    pub goal: String,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            fix_budget: DEFAULT_FIX_BUDGET,
            ablate_fixer: false,
            ablate_refine: false,
            rubric: Rubric::default(),
            rule: SufficiencyRule::default(),
            goal: DEFAULT_GOAL.into(),
        }
    }
}

/// The program and the unit the loop instruments. In indirect mode the
/// target is a caller of the defective unit.
#[derive(Debug, Clone)]
pub struct Subject {
    pub program: Program,
    pub target: String,
    pub mode: Mode,
}

/// Why a stage could not finish; becomes the ledger's failure record.
#[derive(Debug)]
pub struct StageFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl From<ToolchainError> for StageFailure {
    fn from(e: ToolchainError) -> Self {
        let kind = match e {
            ToolchainError::Unavailable { .. } => FailureKind::ToolchainUnavailable,
            _ => FailureKind::Toolchain,
        };
        Self { kind, message: e.to_string() }
    }
}

impl From<GatewayError> for StageFailure {
    fn from(e: GatewayError) -> Self {
        let kind = match e {
            GatewayError::ReplayMiss { .. } => FailureKind::ReplayMiss,
            _ => FailureKind::Gateway,
        };
        Self { kind, message: e.to_string() }
    }
}

/// An instrumented build of one plan.
pub struct Build {
    pub instrumented: InstrumentedUnit,
    pub workspace: Workspace,
    pub compile: CompileResult,
}

pub struct RepairResult {
    pub build: Build,
    pub plan: LoggingPlan,
    pub steps: Vec<RepairStep>,
    pub calls: Vec<CallRecord>,
    pub notes: Vec<String>,
}

/// Stage operations over one subject. `run_loop` strings them together;
/// they are public so each can be exercised on its own.
pub struct Stages<'a> {
    pub program: &'a Program,
    pub source: &'a SourceUnit,
    pub toolchain: &'a Toolchain,
    pub gateway: &'a Gateway,
    pub config: &'a LoopConfig,
    pub plan_id: String,
}

fn plan_json(plan: &LoggingPlan) -> String {
    serde_json::to_string_pretty(plan).expect("plan serializes")
}

fn call(stage: &str, env: &PromptEnvelope, gw: &Gateway) -> Result<CallRecord, GatewayError> {
    Ok(CallRecord { stage: stage.into(), template_id: env.template_id.clone(), envelope_digest: gw.envelope_digest(env)? })
}

impl<'a> Stages<'a> {
    pub fn new(
        program: &'a Program,
        source: &'a SourceUnit,
        toolchain: &'a Toolchain,
        gateway: &'a Gateway,
        config: &'a LoopConfig,
    ) -> Self {
        let plan_id = format!("p{}", &source.digest[..12.min(source.digest.len())]);
        Self { program, source, toolchain, gateway, config, plan_id }
    }

    fn marker(&self) -> &str {
        &self.toolchain.profile.log_marker
    }

    fn code(&self) -> String {
        numbered(&self.source.lines)
    }

    /// Builds and runs the pristine program.
    pub fn probe_original(&self) -> Result<ProbeRecord, StageFailure> {
        let (compile, outcome) = self.toolchain.build_and_run(self.program, None)?;
        Ok(ProbeRecord { compile, outcome })
    }

    /// Stamps the run's plan id and `revision`, clamps anchors past the end
    /// of the source, and drops statements the profile cannot render.
    pub fn adopt(&self, plan: LoggingPlan, revision: u32, notes: &mut Vec<String>) -> LoggingPlan {
        let n = self.source.line_count() as u32;
        let render = &self.toolchain.profile.render;
        let mut out = LoggingPlan::with_statements(self.plan_id.clone(), revision, Vec::new());
        for mut s in plan.statements {
            if s.anchor_line > n {
                notes.push(format!("anchor {} clamped to {n}", s.anchor_line));
                s.anchor_line = n.max(1);
            }
            match render.check_statement(&s) {
                Ok(()) => out.statements.push(s),
                Err(e) => notes.push(format!("dropped statement at {}: {e}", s.anchor_line)),
            }
        }
        out
    }

    pub fn generate_initial_plan(
        &self,
        outcome0: &ExecutionOutcome,
    ) -> Result<(LoggingPlan, CallRecord), GatewayError> {
        let mode = if outcome0.status == OutcomeStatus::Pass { "source" } else { "runtime" };
        let env = PromptEnvelope::new(templates::GENERATION, Schema::LoggingPlan)
            .slot("unit_path", &self.source.path)
            .slot("mode", mode)
            .slot("code", self.code())
            .slot("outcome", OutcomeSummary::of(outcome0, self.marker()).to_slot());
        let record = call("generation", &env, self.gateway)?;
        let (plan, _) = self.gateway.complete_as::<LoggingPlan>(&env)?;
        Ok((plan, record))
    }

    /// Inserts `plan` into the pristine source and compiles the program.
    pub fn build(&self, plan: &LoggingPlan) -> Result<Build, StageFailure> {
        let instrumented = apply_plan(self.source, plan, &self.toolchain.profile.render)
            .map_err(|e| StageFailure { kind: FailureKind::Instrumentation, message: e.to_string() })?;
        let workspace = self.toolchain.materialize(self.program, Some(&instrumented))?;
        let compile = self.toolchain.compile(&workspace)?;
        Ok(Build { instrumented, workspace, compile })
    }

    /// Asks the fixer for a new plan until the build succeeds or the budget
    /// is spent. `revision` is advanced for every candidate.
    pub fn repair_compilation(
        &self,
        plan: LoggingPlan,
        failed: Build,
        revision: &mut u32,
    ) -> Result<RepairResult, StageFailure> {
        let mut current = plan;
        let mut build = failed;
        let mut steps = Vec::new();
        let mut calls = Vec::new();
        let mut notes = Vec::new();
        for attempt in 1..=self.config.fix_budget {
            let env = PromptEnvelope::new(templates::REPAIR, Schema::LoggingPlan)
                .slot("unit_path", &self.source.path)
                .slot("code", self.code())
                .slot("plan", plan_json(&current))
                .slot("diagnostics", diagnostics_slot(&build.compile));
            calls.push(call("repair", &env, self.gateway)?);
            let (candidate, _) = self.gateway.complete_as::<LoggingPlan>(&env)?;
            *revision += 1;
            current = self.adopt(candidate, *revision, &mut notes);
            build = self.build(&current)?;
            steps.push(RepairStep { attempt, plan: current.clone(), compile: build.compile.clone() });
            if build.compile.ok {
                break;
            }
        }
        Ok(RepairResult { build, plan: current, steps, calls, notes })
    }

    /// Critic call. Feedback aimed at anchors without statements is dropped,
    /// then the sufficiency rule is applied to the scores.
    pub fn evaluate_sufficiency(
        &self,
        plan: &LoggingPlan,
        outcome: &ExecutionOutcome,
    ) -> Result<(CriticVerdict, CallRecord, Vec<String>), GatewayError> {
        let env = PromptEnvelope::new(templates::CRITIC, Schema::CriticVerdict)
            .slot("goal", &self.config.goal)
            .slot("unit_path", &self.source.path)
            .slot("code", self.code())
            .slot("plan", plan_json(plan))
            .slot("outcome", OutcomeSummary::of(outcome, self.marker()).to_slot())
            .slot("rubric", self.config.rubric.render_text());
        let record = call("critic", &env, self.gateway)?;
        let (mut verdict, _) = self.gateway.complete_as::<CriticVerdict>(&env)?;
        let mut notes = Vec::new();
        verdict.feedback.retain(|f: &FeedbackItem| {
            let dangling = matches!(f.action, FeedbackAction::Remove | FeedbackAction::Modify)
                && !f.target_anchor.is_some_and(|a| plan.statements.iter().any(|s| s.anchor_line == a));
            if dangling {
                notes.push(format!("dropped {:?} feedback for anchor {:?}", f.action, f.target_anchor));
            }
            !dangling
        });
        let claimed = verdict.sufficient;
        verdict.apply_rule(&self.config.rubric, &self.config.rule);
        if claimed != verdict.sufficient {
            notes.push(format!("critic said sufficient={claimed}; rule says {}", verdict.sufficient));
        }
        Ok((verdict, record, notes))
    }

    pub fn refine_plan(
        &self,
        plan: &LoggingPlan,
        feedback: &[FeedbackItem],
    ) -> Result<(LoggingPlan, EditSummary, CallRecord), GatewayError> {
        let env = PromptEnvelope::new(templates::REFINEMENT, Schema::EditList)
            .slot("unit_path", &self.source.path)
            .slot("code", self.code())
            .slot("plan", plan_json(plan))
            .slot("feedback", serde_json::to_string_pretty(feedback).expect("feedback serializes"));
        let record = call("refinement", &env, self.gateway)?;
        let (edits, _) = self.gateway.complete_as::<EditList>(&env)?;
        let outcome = apply_edits(plan, &edits.edits, self.source.line_count());
        let summary = EditSummary {
            applied: outcome.applied,
            skipped: outcome.skipped.iter().map(ToString::to_string).collect(),
        };
        Ok((outcome.plan, summary, record))
    }
}

/// Runs the loop to a termination status. Never fails: every error ends
/// the run with `execution_error` and a failure record.
pub fn run_loop(subject: &Subject, toolchain: &Toolchain, gateway: &Gateway, config: &LoopConfig) -> RunLedger {
    let fallback;
    let source = match subject.program.unit(&subject.target) {
        Some(s) => s,
        None => {
            fallback = SourceUnit::from_lines(subject.target.clone(), Vec::new(), false);
            &fallback
        }
    };
    let stages = Stages::new(&subject.program, source, toolchain, gateway, config);
    let header = LedgerHeader {
        format: ledger::LEDGER_FORMAT.into(),
        unit_path: source.path.clone(),
        source_digest: source.digest.clone(),
        plan_id: stages.plan_id.clone(),
        config: ConfigSnapshot {
            max_iterations: config.max_iterations,
            fix_budget: config.fix_budget,
            retry_limit: gateway.retry_limit(),
            ablate_fixer: config.ablate_fixer,
            ablate_refine: config.ablate_refine,
            mode: subject.mode,
            goal: config.goal.clone(),
            rubric: config.rubric.clone(),
            rule: config.rule,
            toolchain: toolchain.profile.name.clone(),
        },
    };
    let mut ledger = RunLedger {
        header,
        iterations: Vec::new(),
        footer: LedgerFooter { termination: Termination::ExecutionError, failure: None, iterations: 0, final_plan: None },
    };
    let (termination, failure) = match drive(&stages, &mut ledger.iterations) {
        Ok(t) => (t, None),
        Err(f) => (Termination::ExecutionError, Some(Failure { kind: f.kind, message: f.message })),
    };
    ledger.footer = LedgerFooter {
        termination,
        failure,
        iterations: ledger.iterations.len() as u32,
        final_plan: ledger.iterations.iter().rev().find_map(|r| r.plan.clone()),
    };
    ledger
}

fn drive(st: &Stages<'_>, records: &mut Vec<IterationRecord>) -> Result<Termination, StageFailure> {
    if st.program.unit(&st.source.path).is_none() {
        return Err(StageFailure {
            kind: FailureKind::Instrumentation,
            message: format!("target unit {:?} is not part of the program", st.source.path),
        });
    }
    let cfg = st.config;
    let mut rec = IterationRecord::new(0);
    let probe = st.probe_original();
    let probe = match probe {
        Ok(p) => p,
        Err(f) => {
            records.push(rec);
            return Err(f);
        }
    };
    rec.probe = Some(probe.clone());
    let Some(outcome0) = probe.outcome.filter(|_| probe.compile.ok) else {
        records.push(rec);
        return Err(StageFailure {
            kind: FailureKind::PristineBuildFailed,
            message: "the unmodified program does not build".into(),
        });
    };

    let mut revision = 0u32;
    let mut previous: Option<(LoggingPlan, CriticVerdict)> = None;
    for iteration in 0..cfg.max_iterations {
        if iteration > 0 {
            rec = IterationRecord::new(iteration);
        }
        // Stage 1 or 4: a new plan.
        let proposed = match &previous {
            None => st.generate_initial_plan(&outcome0).map(|(p, c)| {
                rec.calls.push(c);
                p
            }),
            Some((plan, verdict)) => st.refine_plan(plan, &verdict.feedback).map(|(p, summary, c)| {
                rec.calls.push(c);
                rec.edits = Some(summary);
                p
            }),
        };
        let proposed = match proposed {
            Ok(p) => p,
            Err(e) => {
                records.push(rec);
                return Err(e.into());
            }
        };
        if iteration > 0 {
            revision += 1;
        }
        let plan = st.adopt(normalize_plan(&proposed), revision, &mut rec.notes);
        rec.proposed_plan = Some(plan.clone());

        // Stage 2: compile, repairing the plan if needed.
        let build = match st.build(&plan) {
            Ok(b) => b,
            Err(f) => {
                records.push(rec);
                return Err(f);
            }
        };
        let (plan, build) = if build.compile.ok {
            (plan, build)
        } else if cfg.ablate_fixer {
            rec.plan = Some(plan);
            rec.compile = Some(build.compile);
            records.push(rec);
            return Ok(Termination::CompileFailed);
        } else {
            rec.initial_compile = Some(build.compile.clone());
            let repaired = match st.repair_compilation(plan, build, &mut revision) {
                Ok(r) => r,
                Err(f) => {
                    records.push(rec);
                    return Err(f);
                }
            };
            rec.calls.extend(repaired.calls);
            rec.notes.extend(repaired.notes);
            rec.fix_attempts = repaired.steps.len() as u32;
            rec.repairs = repaired.steps;
            if !repaired.build.compile.ok {
                rec.plan = Some(repaired.plan);
                rec.compile = Some(repaired.build.compile);
                records.push(rec);
                return Ok(Termination::CompileFailed);
            }
            (repaired.plan, repaired.build)
        };
        rec.logic_preserved = Some(verify_logic_preserved(st.source, &build.instrumented, &st.toolchain.profile.render).ok);
        rec.plan = Some(plan.clone());
        rec.compile = Some(build.compile.clone());

        // Run it.
        let outcome = match st.toolchain.execute(&build.workspace) {
            Ok(o) => o,
            Err(e) => {
                records.push(rec);
                return Err(e.into());
            }
        };
        rec.outcome = Some(outcome.clone());

        // Stage 3: judge the logs.
        let verdict = match st.evaluate_sufficiency(&plan, &outcome) {
            Ok((v, c, notes)) => {
                rec.calls.push(c);
                rec.notes.extend(notes);
                v
            }
            Err(e) => {
                records.push(rec);
                return Err(e.into());
            }
        };
        rec.verdict = Some(verdict.clone());
        records.push(rec.clone());

        if verdict.sufficient {
            return Ok(Termination::Sufficient);
        }
        if cfg.ablate_refine || iteration + 1 == cfg.max_iterations {
            return Ok(Termination::BudgetExhausted);
        }
        previous = Some((plan, verdict));
    }
    Ok(Termination::BudgetExhausted)
}
