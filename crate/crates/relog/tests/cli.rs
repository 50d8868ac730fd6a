use std::path::Path;
use std::process::{Command, Output};

fn relog(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relog")).args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn write_fixtures(dir: &Path) {
    let out = relog(&["fixtures", "corpus"], dir);
    assert_eq!(code(&out), 0, "{}", text(&out));
}

#[test]
fn eval_writes_reports_and_ledgers() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let out = relog(&["eval", "corpus", "--mode", "direct", "--out", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", text(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("| Direct |"));
    assert!(stdout.contains("true positive ="));
    assert!(!stdout.contains("| Indirect |"));
    for f in ["out/report.json", "out/report.md", "out/ledgers/loop_bound-direct-0.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let trace = relog(&["report", "out/ledgers/loop_bound-direct-0.jsonl"], dir.path());
    assert_eq!(code(&trace), 0);
    assert!(String::from_utf8_lossy(&trace.stdout).contains("## Iteration 0"));
}

#[test]
fn run_exit_code_follows_termination() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let main = "corpus/loop_bound-direct-0/main.rs";
    let ok = relog(&["run", main, "--target", "unit.rs", "--out", "a"], dir.path());
    assert_eq!(code(&ok), 0, "{}", text(&ok));

    let cfg = dir.path().join("never.toml");
    std::fs::write(&cfg, "[provider.stub]\ncritic = \"always_insufficient\"\n").unwrap();
    let spent = relog(&["run", main, "--target", "unit.rs", "--config", "never.toml", "--max-iterations", "2", "--out", "b"], dir.path());
    assert_eq!(code(&spent), 2, "{}", text(&spent));
    assert!(String::from_utf8_lossy(&spent.stdout).contains("after 2 iteration(s)"));

    std::fs::write(dir.path().join("noop.toml"), "[provider.stub]\nfixer = \"noop\"\ninject_broken = true\n").unwrap();
    let failed = relog(&["run", main, "--target", "unit.rs", "--config", "noop.toml", "--out", "c"], dir.path());
    assert_eq!(code(&failed), 3, "{}", text(&failed));
}

#[test]
fn replayed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let main = "corpus/wrong_init-direct-0/main.rs";
    let rec = relog(&["run", main, "--target", "unit.rs", "--record", "rec", "--out", "r0"], dir.path());
    assert_eq!(code(&rec), 0, "{}", text(&rec));
    for out in ["r1", "r2"] {
        let rep = relog(&["run", main, "--target", "unit.rs", "--replay", "rec", "--out", out], dir.path());
        assert_eq!(code(&rep), 0, "{}", text(&rep));
    }
    let read = |out: &str, file: &str| {
        let run = std::fs::read_dir(dir.path().join(out)).unwrap().next().unwrap().unwrap().path();
        std::fs::read(run.join(file)).unwrap()
    };
    for file in ["ledger.jsonl", "trace.md", "plan.json"] {
        assert_eq!(read("r1", file), read("r2", file), "{file}");
        assert_eq!(read("r0", file), read("r1", file), "{file}");
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let main = "corpus/loop_bound-direct-0/main.rs";

    std::fs::write(dir.path().join("bad.toml"), "[budgets]\nmax_iterations = 0\n").unwrap();
    assert_eq!(code(&relog(&["run", main, "--config", "bad.toml"], dir.path())), 10);
    assert_eq!(code(&relog(&["run", main, "--replay", "no-such-dir-is-fine-but-empty", "--out", "x"], dir.path())), 4);
    assert_eq!(code(&relog(&["run", "corpus/nothing.rs"], dir.path())), 11);
    assert_eq!(code(&relog(&["eval", "missing"], dir.path())), 14);
    assert_eq!(code(&relog(&["mine", "corpus"], dir.path())), 13);

    let profile = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/profiles/rustc.toml"))
        .unwrap()
        .replacen("compile_cmd = \"rustc ", "compile_cmd = \"relog-missing-rustc ", 1);
    std::fs::write(dir.path().join("gone.toml"), profile).unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "toolchain = \"gone.toml\"\n").unwrap();
    let gone = relog(&["run", main, "--target", "unit.rs", "--config", "cfg.toml", "--out", "g"], dir.path());
    assert_eq!(code(&gone), 12, "{}", text(&gone));
    let gone = relog(&["eval", "corpus", "--config", "cfg.toml", "--out", "g"], dir.path());
    assert_eq!(code(&gone), 12, "{}", text(&gone));
}
