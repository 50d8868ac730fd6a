use std::path::{Path, PathBuf};

use relog::config::RunConfig;
use relog::eval::{load_benchmark, validate_repair, EvalError, Evaluator, Generator, ValidationCache};
use relog::fixtures::{self, Family};
use relog::pipeline::{Mode, Termination};
use relog::profile::ToolchainProfile;
use relog::toolchain::Toolchain;
use relog_core::{LoggingPlan, LoggingStatement, Patch, Position, Severity};
use serde_json::Value;

fn toolchain() -> Toolchain {
    Toolchain::new(ToolchainProfile::rustc()).unwrap()
}

fn corpus(dir: &Path, instances: &[fixtures::FixtureInstance]) -> PathBuf {
    fixtures::write_corpus(dir, instances).unwrap()
}

fn edit_manifest(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    std::fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

#[test]
fn instances_that_do_not_reproduce_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let instances =
        vec![fixtures::instance(Family::LoopBound, Mode::Direct, 0, false), fixtures::instance(Family::Overflow, Mode::Direct, 0, false)];
    let manifest = corpus(dir.path(), &instances);
    // The second instance's "fixed" unit is the defective one.
    std::fs::copy(dir.path().join("overflow-direct-0/unit.rs"), dir.path().join("overflow-direct-0/fixed/unit.rs")).unwrap();
    let mut cache = ValidationCache::in_memory();
    let bench = load_benchmark(&manifest, Some(&toolchain()), &mut cache).unwrap();
    let kept: Vec<&str> = bench.instances.iter().map(|i| i.instance_id.as_str()).collect();
    assert_eq!(kept, vec!["loop_bound-direct-0"]);
    assert_eq!(bench.excluded.len(), 1);
    assert_eq!(bench.excluded[0].instance_id, "overflow-direct-0");
    assert!(bench.excluded[0].reason.contains("still fail"), "{}", bench.excluded[0].reason);
}

#[test]
fn validation_results_are_cached_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(&dir.path().join("c"), &[fixtures::instance(Family::WrongInit, Mode::Direct, 0, false)]);
    let cache_path = dir.path().join("cache.json");
    let mut cache = ValidationCache::open(cache_path.clone());
    load_benchmark(&manifest, Some(&toolchain()), &mut cache).unwrap();
    let reopened = ValidationCache::open(cache_path);
    let stored: serde_json::Map<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cache.json")).unwrap()).unwrap();
    assert_eq!(stored.len(), 1);
    let digest = stored.keys().next().unwrap();
    assert_eq!(reopened.get(digest), Some(Ok(())));
}

#[test]
fn indirect_entry_without_callers_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), &[fixtures::instance(Family::WrongFilter, Mode::Indirect, 0, false)]);
    edit_manifest(&manifest, |v| v["instances"][0]["paths"]["callers"] = Value::Array(vec![]));
    let err = load_benchmark(&manifest, Some(&toolchain()), &mut ValidationCache::in_memory()).unwrap_err();
    assert!(matches!(err, EvalError::ManifestInvalid(ref m) if m.contains("callers")), "{err}");
}

#[test]
fn duplicate_ids_are_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixtures::instance(Family::LoopBound, Mode::Direct, 0, false);
    let manifest = corpus(dir.path(), &[inst.clone(), inst]);
    let err = load_benchmark(&manifest, Some(&toolchain()), &mut ValidationCache::in_memory()).unwrap_err();
    assert!(matches!(err, EvalError::ManifestInvalid(_)));
}

#[test]
fn reference_patch_repairs_and_empty_patch_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixtures::instance(Family::WrongFilter, Mode::Direct, 0, false);
    let manifest = corpus(dir.path(), std::slice::from_ref(&inst));
    let tc = toolchain();
    let bench = load_benchmark(&manifest, Some(&tc), &mut ValidationCache::in_memory()).unwrap();
    let b = &bench.instances[0];
    assert!(validate_repair(b, inst.stub.repair.as_ref().unwrap(), &tc).unwrap().ok);
    assert!(!validate_repair(b, &Patch::default(), &tc).unwrap().ok);
}

#[test]
fn generators_are_compared_on_the_same_instances() {
    let dir = tempfile::tempdir().unwrap();
    let instances = vec![
        fixtures::instance(Family::LoopBound, Mode::Direct, 0, false),
        fixtures::instance(Family::WrongFilter, Mode::Indirect, 0, false),
    ];
    let manifest = corpus(&dir.path().join("c"), &instances);
    let tc = toolchain();
    let bench = load_benchmark(&manifest, Some(&tc), &mut ValidationCache::in_memory()).unwrap();
    let cfg = RunConfig::default();
    let ledgers = dir.path().join("ledgers");
    std::fs::create_dir_all(&ledgers).unwrap();

    let relog = Evaluator::new(&cfg, &tc, Generator::Relog).unwrap().with_ledger_dir(&ledgers).run(&bench).unwrap();
    assert_eq!(relog.instances.len(), 2);
    for r in &relog.instances {
        assert_eq!(r.termination, Some(Termination::Sufficient));
        assert!(r.detected && r.true_positive, "{}", r.instance_id);
        assert!(ledgers.join(format!("{}.jsonl", r.instance_id)).exists());
    }
    let direct = relog.direct.as_ref().unwrap();
    assert_eq!((direct.total, direct.true_positives, direct.successful_repairs), (1, 1, Some(1)));
    assert!(relog.indirect.as_ref().unwrap().successful_repairs.is_none());
    assert!(relog.table().contains("Avg. Logs per Caller"));

    // Without logs the loop-bound defect produces no visible failure state.
    let none = Evaluator::new(&cfg, &tc, Generator::None).unwrap().run(&bench).unwrap();
    let lb = none.result("loop_bound-direct-0").unwrap();
    assert!(!lb.detected);
    assert_eq!(lb.plan_statements, 0);
    assert!(lb.termination.is_none());

    // An external plan that logs the accumulator is enough for detection.
    let plans = dir.path().join("plans");
    std::fs::create_dir_all(&plans).unwrap();
    let plan = LoggingPlan::with_statements(
        "ext",
        0,
        vec![LoggingStatement::new(4, Position::After, Severity::Debug, "acc={}", vec!["acc".into()])],
    );
    std::fs::write(plans.join("loop_bound-direct-0.json"), serde_json::to_string(&plan).unwrap()).unwrap();
    let ext = Evaluator::new(&cfg, &tc, Generator::PlanFile(plans)).unwrap().run(&bench).unwrap();
    let lb = ext.result("loop_bound-direct-0").unwrap();
    assert!(lb.detected && lb.true_positive);
    assert_eq!(lb.plan_statements, 1);
    let other = ext.result("wrong_filter-indirect-0").unwrap();
    assert!(other.notes.iter().any(|n| n.contains("no plan")));
}
