//! The downstream debugging agent.

use relog_core::LoggingPlan;

use super::manifest::BenchmarkInstance;
use crate::gateway::stub::join_sources;
use crate::gateway::{templates, CallRecord, DebugVerdict, Gateway, PromptEnvelope, Schema};
use crate::pipeline::Mode;
use crate::summary::{events_slot, OutcomeSummary};
use crate::syntax::numbered;
use crate::toolchain::{ExecutionOutcome, LogEvent};

/// What the agent is shown besides code.
pub struct Evidence<'a> {
    pub plan: &'a LoggingPlan,
    pub events: &'a [LogEvent],
    pub outcome: &'a ExecutionOutcome,
}

/// Direct mode shows the defective unit; indirect mode shows only the
/// callers. Both show the plan, the log events and the outcome summary.
pub fn debug_envelope(inst: &BenchmarkInstance, ev: &Evidence<'_>, marker: &str) -> PromptEnvelope {
    let plan = serde_json::to_string_pretty(ev.plan).expect("plan serializes");
    let outcome = OutcomeSummary::of(ev.outcome, marker).to_slot();
    match inst.mode {
        Mode::Direct => PromptEnvelope::new(templates::DEBUG_DIRECT, Schema::DebugVerdict)
            .slot("unit_path", &inst.defective_path)
            .slot("code", numbered(&inst.defective_unit().lines)),
        Mode::Indirect => {
            let callers = inst
                .callers
                .iter()
                .filter_map(|c| inst.program.unit(c))
                .map(|u| (u.path.as_str(), u.lines.as_slice()));
            PromptEnvelope::new(templates::DEBUG_INDIRECT, Schema::DebugVerdict)
                .slot("instrumented_path", inst.target())
                .slot("callers", join_sources(callers))
        }
    }
    .slot("plan", plan)
    .slot("logs", events_slot(ev.events))
    .slot("outcome", outcome)
}

#[derive(Debug, Clone)]
pub struct AgentAnswer {
    pub verdict: DebugVerdict,
    pub call: Option<CallRecord>,
    /// Set when the gateway failed; the verdict is then "not detected".
    pub error: Option<String>,
}

pub fn run_debug_agent(inst: &BenchmarkInstance, ev: &Evidence<'_>, gateway: &Gateway, marker: &str) -> AgentAnswer {
    let env = debug_envelope(inst, ev, marker);
    let call = gateway.envelope_digest(&env).ok().map(|d| CallRecord {
        stage: "debug".into(),
        template_id: env.template_id.clone(),
        envelope_digest: d,
    });
    match gateway.complete_as::<DebugVerdict>(&env) {
        Ok((verdict, _)) => AgentAnswer { verdict, call, error: None },
        Err(e) => AgentAnswer {
            verdict: DebugVerdict::not_detected(format!("agent failed: {e}")),
            call,
            error: Some(e.to_string()),
        },
    }
}
