use proptest::prelude::*;
use relog::config::RunConfig;
use relog::fixtures::{self, Family, FixtureInstance};
use relog::gateway::stub::{CriticMode, FixerMode};
use relog::pipeline::{run_loop, Mode, RunLedger, Subject, Termination};
use relog::profile::ToolchainProfile;
use relog::toolchain::Toolchain;

fn toolchain() -> Toolchain {
    Toolchain::new(ToolchainProfile::rustc()).unwrap()
}

fn run(inst: &FixtureInstance, cfg: &RunConfig) -> RunLedger {
    let tc = toolchain();
    let gateway = cfg.gateway(&inst.stub, &tc.profile).unwrap();
    let subject = Subject { program: inst.program(), target: inst.target().into(), mode: inst.mode };
    run_loop(&subject, &tc, &gateway, &cfg.loop_config())
}

fn never_satisfied(max_iterations: u32) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.provider.stub.critic = CriticMode::AlwaysInsufficient;
    cfg.budgets.max_iterations = max_iterations;
    cfg
}

fn never_fixed(fix_budget: u32) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.provider.stub.fixer = FixerMode::Noop;
    cfg.provider.stub.inject_broken = Some(true);
    cfg.budgets.fix_budget = fix_budget;
    cfg
}

/// Properties every ledger has, whatever the termination.
fn check_invariants(ledger: &RunLedger, cfg: &RunConfig) {
    assert!(ledger.iterations.len() as u32 <= cfg.budgets.max_iterations);
    assert_eq!(ledger.footer.iterations as usize, ledger.iterations.len());
    let mut revision = 0;
    for (i, rec) in ledger.iterations.iter().enumerate() {
        assert_eq!(rec.iteration as usize, i);
        assert!(rec.fix_attempts <= cfg.budgets.fix_budget);
        assert_eq!(rec.repairs.len() as u32, rec.fix_attempts);
        if let Some(plan) = &rec.plan {
            assert!(plan.revision >= revision);
            revision = plan.revision;
            assert_eq!(plan.plan_id, ledger.header.plan_id);
        }
        if rec.compile.as_ref().is_some_and(|c| c.ok) {
            assert_eq!(rec.logic_preserved, Some(true));
            assert!(rec.outcome.is_some());
        } else {
            assert!(rec.outcome.is_none());
        }
    }
    if ledger.termination() == Termination::Sufficient {
        assert!(ledger.last_verdict().unwrap().sufficient);
    }
    // Wall-clock times stay out of the ledger, so compare serialized text.
    let text = ledger.to_jsonl();
    assert_eq!(RunLedger::from_jsonl(&text).unwrap().to_jsonl(), text);
}

#[test]
fn insufficient_critic_exhausts_five_iterations() {
    let cfg = never_satisfied(5);
    let ledger = run(&fixtures::instance(Family::LoopBound, Mode::Direct, 0, false), &cfg);
    assert_eq!(ledger.termination(), Termination::BudgetExhausted);
    assert_eq!(ledger.iterations.len(), 5);
    assert_eq!(ledger.header.config.max_iterations, 5);
    check_invariants(&ledger, &cfg);
}

#[test]
fn noop_fixer_spends_three_repairs_then_fails() {
    let cfg = never_fixed(3);
    let ledger = run(&fixtures::instance(Family::WrongFilter, Mode::Direct, 0, false), &cfg);
    assert_eq!(ledger.termination(), Termination::CompileFailed);
    assert_eq!(ledger.iterations.len(), 1);
    assert_eq!(ledger.iterations[0].fix_attempts, 3);
    assert_eq!(ledger.iterations[0].repairs.len(), 3);
    check_invariants(&ledger, &cfg);
}

#[test]
fn fixer_ablation_fails_on_first_broken_build() {
    let cfg = RunConfig { ablate_fixer: true, ..RunConfig::default() };
    let ledger = run(&fixtures::instance(Family::Overflow, Mode::Direct, 1, true), &cfg);
    assert_eq!(ledger.termination(), Termination::CompileFailed);
    assert_eq!(ledger.iterations[0].fix_attempts, 0);
    check_invariants(&ledger, &cfg);
}

#[test]
fn refine_ablation_runs_one_iteration() {
    let mut cfg = never_satisfied(5);
    cfg.ablate_refine = true;
    let ledger = run(&fixtures::instance(Family::WrongInit, Mode::Indirect, 0, false), &cfg);
    assert_eq!(ledger.iterations.len(), 1);
    assert_eq!(ledger.termination(), Termination::BudgetExhausted);
    check_invariants(&ledger, &cfg);
}

#[test]
fn broken_generation_is_repaired_and_converges() {
    let cfg = RunConfig::default();
    for family in Family::ALL {
        let ledger = run(&fixtures::instance(family, Mode::Direct, 1, true), &cfg);
        assert_eq!(ledger.termination(), Termination::Sufficient, "{}", family.name());
        assert!(ledger.iterations[0].fix_attempts >= 1);
        check_invariants(&ledger, &cfg);
    }
}

#[test]
fn broken_original_is_reported_not_looped() {
    let mut inst = fixtures::instance(Family::LoopBound, Mode::Direct, 0, false);
    inst.unit = inst.unit.replacen("0;", "undeclared;", 1);
    let ledger = run(&inst, &RunConfig::default());
    assert_eq!(ledger.termination(), Termination::ExecutionError);
    assert!(ledger.footer.failure.is_some());
}

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Direct), Just(Mode::Indirect)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn iterations_equal_budget_when_never_satisfied(n in 1u32..=6, f in family(), m in mode()) {
        let cfg = never_satisfied(n);
        let ledger = run(&fixtures::instance(f, m, 0, false), &cfg);
        prop_assert_eq!(ledger.termination(), Termination::BudgetExhausted);
        prop_assert_eq!(ledger.iterations.len() as u32, n);
        check_invariants(&ledger, &cfg);
    }

    #[test]
    fn repairs_equal_fix_budget_when_never_fixed(k in 1u32..=5, f in family(), m in mode()) {
        let cfg = never_fixed(k);
        let ledger = run(&fixtures::instance(f, m, 0, false), &cfg);
        prop_assert_eq!(ledger.termination(), Termination::CompileFailed);
        prop_assert_eq!(ledger.iterations[0].fix_attempts, k);
        check_invariants(&ledger, &cfg);
    }
}

