use relog::fixtures::{BROKEN, HEALTHY, PANICS_AT_12, SPINS};
use relog::profile::ToolchainProfile;
use relog::toolchain::{OutcomeStatus, Program, Toolchain, ToolchainError};
use relog_core::{apply_plan, LoggingPlan, LoggingStatement, Position, Severity, SourceUnit};

fn rustc() -> Toolchain {
    Toolchain::new(ToolchainProfile::rustc()).unwrap()
}

fn program(text: &str) -> Program {
    Program::single(SourceUnit::from_text("main.rs", text))
}

#[test]
fn healthy_program_passes_with_its_output() {
    let (compile, outcome) = rustc().build_and_run(&program(HEALTHY), None).unwrap();
    assert!(compile.ok, "{}", compile.output);
    let outcome = outcome.unwrap();
    assert_eq!(outcome.status, OutcomeStatus::Pass);
    assert_eq!(outcome.exit_code, Some(0));
    assert_eq!(outcome.stdout, "hello\n");
    assert!(outcome.log_events.is_empty());
}

#[test]
fn panic_is_an_exception_with_its_source_line() {
    let (_, outcome) = rustc().build_and_run(&program(PANICS_AT_12), None).unwrap();
    let outcome = outcome.unwrap();
    assert_eq!(outcome.status, OutcomeStatus::Exception);
    let info = outcome.exception_info.unwrap();
    assert!(info.message.contains("index out of bounds"), "{}", info.message);
    assert_eq!(info.frames[0].file, "main.rs");
    assert_eq!(info.frames[0].line, Some(12));
}

#[test]
fn panic_line_maps_back_through_instrumentation() {
    let unit = SourceUnit::from_text("main.rs", PANICS_AT_12);
    let plan = LoggingPlan::with_statements(
        "t",
        0,
        vec![
            LoggingStatement::new(10, Position::After, Severity::Info, "xs={}", vec!["xs".into()]),
            LoggingStatement::new(11, Position::After, Severity::Debug, "i={}", vec!["i".into()]),
        ],
    );
    let tc = rustc();
    let instr = apply_plan(&unit, &plan, &tc.profile.render).unwrap();
    let (compile, outcome) = tc.build_and_run(&program(PANICS_AT_12), Some(&instr)).unwrap();
    assert!(compile.ok, "{}", compile.output);
    let outcome = outcome.unwrap();
    assert_eq!(outcome.exception_info.unwrap().frames[0].line, Some(12));
    let markers: Vec<Option<usize>> = outcome.log_events.iter().map(|e| e.source_marker).collect();
    assert_eq!(markers, vec![Some(0), Some(1)]);
    assert_eq!(outcome.log_events[1].message, "i=3");
}

#[test]
fn endless_loop_times_out() {
    let mut profile = ToolchainProfile::rustc();
    profile.timeout_s = 1.0;
    let tc = Toolchain::new(profile).unwrap();
    let start = std::time::Instant::now();
    let (_, outcome) = tc.build_and_run(&program(SPINS), None).unwrap();
    assert_eq!(outcome.unwrap().status, OutcomeStatus::Timeout);
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn compile_error_names_the_line() {
    let (compile, outcome) = rustc().build_and_run(&program(BROKEN), None).unwrap();
    assert!(!compile.ok);
    assert!(outcome.is_none());
    let err = compile.diagnostics.iter().find(|d| d.is_error).unwrap();
    assert_eq!(err.file, "main.rs");
    assert_eq!(err.line, Some(3));
}

#[test]
fn repeated_failed_build_gives_the_same_result() {
    let tc = rustc();
    let (first, _) = tc.build_and_run(&program(BROKEN), None).unwrap();
    let (again, _) = tc.build_and_run(&program(BROKEN), None).unwrap();
    assert_eq!(first, again);
    // A different program is still compiled.
    let (healthy, outcome) = tc.build_and_run(&program(HEALTHY), None).unwrap();
    assert!(healthy.ok && outcome.is_some());
}

#[test]
fn missing_compiler_is_unavailable() {
    let mut profile = ToolchainProfile::rustc();
    profile.compile_cmd = "relog-no-such-compiler {main_file}".into();
    let tc = Toolchain::new(profile).unwrap();
    match tc.build_and_run(&program(HEALTHY), None) {
        Err(ToolchainError::Unavailable { command, .. }) => assert_eq!(command, "relog-no-such-compiler"),
        other => panic!("expected unavailable, got {other:?}"),
    }
}
