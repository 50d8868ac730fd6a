//! Small Rust programs with known defects, plus a few single-file programs
//! with known runtime behaviour.
//!
//! Each defect family comes in a direct flavour (the defective `unit.rs` is
//! instrumented) and an indirect one (a `caller.rs` that calls into it is
//! instrumented). The test driver in `main.rs` prints one
//! `test NAME ... ok|FAILED` line per test: the regression test first, the
//! failing test second.

use std::path::Path;

use relog_core::SourceUnit;
use serde_json::{json, Value};

use crate::gateway::stub::{CmpOp, Expectation, KeyVariable, Scope, StubConfig};
use crate::pipeline::Mode;
use crate::toolchain::Program;

/// Prints `hello` on stdout and exits 0.
pub const HEALTHY: &str = "fn main() {
    let greeting = \"hello\";
    println!(\"{}\", greeting);
}
";

/// Panics on line 12 with an index out of bounds.
pub const PANICS_AT_12: &str = "fn pick(xs: &[i32], i: usize) -> i32 {
    xs[i]
}

fn offset() -> usize {
    3
}

fn main() {
    let xs = vec![1, 2, 3];
    let i = offset();
    let v = xs[i];
    println!(\"{}\", pick(&xs, 0) + v);
}
";

/// Never terminates.
pub const SPINS: &str = "fn main() {
    let mut n: u64 = 0;
    loop {
        n = n.wrapping_add(1);
        std::hint::black_box(n);
    }
}
";

/// Does not compile: `missing` is not declared.
pub const BROKEN: &str = "fn main() {
    let x = 1;
    println!(\"{}\", x + missing);
}
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    LoopBound,
    WrongFilter,
    IndexOtherMethod,
    Overflow,
    WrongInit,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Self::LoopBound, Self::WrongFilter, Self::IndexOtherMethod, Self::Overflow, Self::WrongInit];

    pub fn name(self) -> &'static str {
        match self {
            Self::LoopBound => "loop_bound",
            Self::WrongFilter => "wrong_filter",
            Self::IndexOtherMethod => "index_other_method",
            Self::Overflow => "overflow",
            Self::WrongInit => "wrong_init",
        }
    }
}

/// One generated instance, before it is written out.
#[derive(Debug, Clone)]
pub struct FixtureInstance {
    pub instance_id: String,
    pub mode: Mode,
    pub main: String,
    pub unit: String,
    pub fixed_unit: String,
    pub caller: Option<String>,
    pub failing_test: String,
    pub regression_test: String,
    pub fault_lines: Vec<u32>,
    pub stub: StubConfig,
}

impl FixtureInstance {
    /// The file the loop instruments: the unit, or the caller in indirect mode.
    pub fn target(&self) -> &str {
        if self.caller.is_some() {
            "caller.rs"
        } else {
            "unit.rs"
        }
    }

    pub fn program(&self) -> Program {
        let mut units = vec![SourceUnit::from_text("unit.rs", &self.unit)];
        if let Some(c) = &self.caller {
            units.push(SourceUnit::from_text("caller.rs", c));
        }
        Program { units, support: vec![("main.rs".into(), self.main.clone())], main_file: "main.rs".into() }
    }
}

struct Spec {
    unit: &'static str,
    fixed: &'static str,
    fault_lines: &'static [u32],
    caller: &'static str,
    regression: (&'static str, &'static str),
    failing: [(&'static str, &'static str); 2],
}

fn key(name: &str, function: &str) -> KeyVariable {
    KeyVariable { name: name.into(), function: Some(function.into()) }
}

fn expect(variable: &str, op: CmpOp, value: &str, scope: Scope) -> Expectation {
    Expectation { variable: variable.into(), op, value: value.into(), scope }
}

fn spec(family: Family) -> Spec {
    match family {
        Family::LoopBound => Spec {
            unit: "pub fn sum_to(n: u32) -> u64 {
    let mut acc: u32 = 0;
    for i in 1..n {
        acc += i;
    }
    u64::from(acc)
}
",
            fixed: "pub fn sum_to(n: u32) -> u64 {
    let mut acc: u32 = 0;
    for i in 1..=n {
        acc += i;
    }
    u64::from(acc)
}
",
            fault_lines: &[3],
            caller: "use crate::unit;

pub fn total_label(n: u32) -> String {
    let total = unit::sum_to(n);
    format!(\"{}\", total)
}
",
            regression: ("unit::sum_to(0) == 0", "caller::total_label(0) == \"0\""),
            failing: [
                ("unit::sum_to(5) == 15", "caller::total_label(5) == \"15\""),
                ("unit::sum_to(4) == 10", "caller::total_label(4) == \"10\""),
            ],
        },
        Family::WrongFilter => Spec {
            unit: "pub fn count_even(xs: &[i32]) -> usize {
    let mut count = 0;
    for &x in xs {
        if x % 2 == 1 {
            count += 1;
        }
    }
    return count;
}
",
            fixed: "pub fn count_even(xs: &[i32]) -> usize {
    let mut count = 0;
    for &x in xs {
        if x % 2 == 0 {
            count += 1;
        }
    }
    return count;
}
",
            fault_lines: &[4],
            caller: "use crate::unit;

pub fn even_count(xs: &[i32]) -> usize {
    let found = unit::count_even(xs);
    return found;
}
",
            regression: ("unit::count_even(&[]) == 0", "caller::even_count(&[]) == 0"),
            failing: [
                ("unit::count_even(&[2, 4, 5, 6]) == 3", "caller::even_count(&[2, 4, 5, 6]) == 3"),
                ("unit::count_even(&[1, 2, 4, 7, 8]) == 3", "caller::even_count(&[1, 2, 4, 7, 8]) == 3"),
            ],
        },
        Family::IndexOtherMethod => Spec {
            unit: "pub fn pick_index(key: usize, len: usize) -> usize {
    let idx = key % len + 1;
    idx
}

pub fn lookup(table: &[i32], key: usize) -> i32 {
    let idx = pick_index(key, table.len());
    table[idx]
}
",
            fixed: "pub fn pick_index(key: usize, len: usize) -> usize {
    let idx = key % len;
    idx
}

pub fn lookup(table: &[i32], key: usize) -> i32 {
    let idx = pick_index(key, table.len());
    table[idx]
}
",
            fault_lines: &[2],
            caller: "use crate::unit;

pub fn price_of(key: usize) -> i32 {
    let table = [10, 20, 30, 40];
    let price = unit::lookup(&table, key);
    price
}
",
            regression: ("unit::lookup(&[1, 2, 3, 4], 0) > 0", "caller::price_of(0) > 0"),
            failing: [
                ("unit::lookup(&[10, 20, 30, 40], 3) == 40", "caller::price_of(3) == 40"),
                ("unit::lookup(&[5, 6, 7], 2) == 7", "caller::price_of(7) == 40"),
            ],
        },
        Family::Overflow => Spec {
            unit: "pub fn total(xs: &[u8]) -> u8 {
    let mut sum: u8 = 0;
    for &x in xs {
        sum += x;
    }
    sum
}
",
            fixed: "pub fn total(xs: &[u8]) -> u32 {
    let mut sum: u32 = 0;
    for &x in xs {
        sum += u32::from(x);
    }
    sum
}
",
            fault_lines: &[1, 2, 4],
            caller: "use crate::unit;

pub fn checksum(data: &[u8]) -> u32 {
    let sum = u32::from(unit::total(data));
    sum
}
",
            regression: ("u32::from(unit::total(&[1, 2])) == 3", "caller::checksum(&[1, 2]) == 3"),
            failing: [
                ("u32::from(unit::total(&[200, 100])) == 300", "caller::checksum(&[200, 100]) == 300"),
                ("u32::from(unit::total(&[255, 1])) == 256", "caller::checksum(&[255, 1]) == 256"),
            ],
        },
        Family::WrongInit => Spec {
            unit: "pub fn max_of(xs: &[i32]) -> i32 {
    let mut best = 0;
    for &x in xs {
        if x > best {
            best = x;
        }
    }
    return best;
}
",
            fixed: "pub fn max_of(xs: &[i32]) -> i32 {
    let mut best = i32::MIN;
    for &x in xs {
        if x > best {
            best = x;
        }
    }
    return best;
}
",
            fault_lines: &[2],
            caller: "use crate::unit;

pub fn peak(xs: &[i32]) -> i32 {
    let best = unit::max_of(xs);
    return best;
}
",
            regression: ("unit::max_of(&[3, 7, 1]) == 7", "caller::peak(&[3, 7, 1]) == 7"),
            failing: [
                ("unit::max_of(&[-5, -2, -9]) == -2", "caller::peak(&[-5, -2, -9]) == -2"),
                ("unit::max_of(&[-4, -8]) == -4", "caller::peak(&[-4, -8]) == -4"),
            ],
        },
    }
}

/// Stub knowledge per family, mode and variant: which variable settles
/// sufficiency and which logged values betray the defect.
fn stub_for(family: Family, mode: Mode, variant: usize) -> StubConfig {
    let (keys, expectations) = match (family, mode) {
        (Family::LoopBound, Mode::Direct) => {
            (vec![key("acc", "sum_to")], vec![expect("acc", CmpOp::Eq, ["15", "10"][variant], Scope::Final)])
        }
        (Family::LoopBound, Mode::Indirect) => (
            vec![key("total", "total_label")],
            vec![expect("total", CmpOp::Eq, ["15", "10"][variant], Scope::Final)],
        ),
        (Family::WrongFilter, Mode::Direct) => {
            (vec![key("count", "count_even")], vec![expect("count", CmpOp::Eq, "3", Scope::Final)])
        }
        (Family::WrongFilter, Mode::Indirect) => {
            (vec![key("found", "even_count")], vec![expect("found", CmpOp::Eq, "3", Scope::Final)])
        }
        (Family::IndexOtherMethod, Mode::Direct) => {
            (vec![key("idx", "pick_index")], vec![expect("idx", CmpOp::Lt, ["4", "3"][variant], Scope::All)])
        }
        (Family::IndexOtherMethod, Mode::Indirect) => (vec![key("key", "price_of")], Vec::new()),
        (Family::Overflow, Mode::Direct) => (vec![key("sum", "total")], Vec::new()),
        (Family::Overflow, Mode::Indirect) => (vec![key("data", "checksum")], Vec::new()),
        (Family::WrongInit, Mode::Direct) => {
            (vec![key("best", "max_of")], vec![expect("best", CmpOp::Eq, ["-2", "-4"][variant], Scope::Final)])
        }
        (Family::WrongInit, Mode::Indirect) => {
            (vec![key("best", "peak")], vec![expect("best", CmpOp::Eq, ["-2", "-4"][variant], Scope::Final)])
        }
    };
    StubConfig { key_variables: keys, expectations, ..StubConfig::default() }
}

fn driver(mode: Mode, regression: &str, failing: &str) -> String {
    let mods = match mode {
        Mode::Direct => "mod unit;\n",
        Mode::Indirect => "mod caller;\nmod unit;\n",
    };
    format!(
        "{mods}
fn check(name: &str, ok: bool) -> bool {{
    println!(\"test {{}} ... {{}}\", name, if ok {{ \"ok\" }} else {{ \"FAILED\" }});
    ok
}}

fn main() {{
    let mut all = true;
    all &= check(\"regression\", {regression});
    all &= check(\"failing\", {failing});
    if !all {{
        std::process::exit(1);
    }}
}}
"
    )
}

pub fn instance(family: Family, mode: Mode, variant: usize, inject_broken: bool) -> FixtureInstance {
    let s = spec(family);
    let pick = |pair: (&str, &str)| match mode {
        Mode::Direct => pair.0.to_string(),
        Mode::Indirect => pair.1.to_string(),
    };
    let mode_name = match mode {
        Mode::Direct => "direct",
        Mode::Indirect => "indirect",
    };
    let mut stub = stub_for(family, mode, variant);
    stub.inject_broken = inject_broken;
    if mode == Mode::Direct {
        let lines = |t: &str| t.lines().map(str::to_string).collect::<Vec<_>>();
        stub.repair = Some(crate::eval::diff_patch(&lines(s.unit), &lines(s.fixed)));
    }
    FixtureInstance {
        instance_id: format!("{}-{mode_name}-{variant}", family.name()),
        mode,
        main: driver(mode, &pick(s.regression), &pick(s.failing[variant])),
        unit: s.unit.into(),
        fixed_unit: s.fixed.into(),
        caller: (mode == Mode::Indirect).then(|| s.caller.to_string()),
        failing_test: "failing".into(),
        regression_test: "regression".into(),
        fault_lines: s.fault_lines.to_vec(),
        stub,
    }
}

/// Ten instances, one per family and mode, none with broken generation.
pub fn convergent_set() -> Vec<FixtureInstance> {
    let mut out = Vec::new();
    for mode in [Mode::Direct, Mode::Indirect] {
        for f in Family::ALL {
            out.push(instance(f, mode, 0, false));
        }
    }
    out
}

/// Twenty instances: every family, mode and variant. Variant 1 instances
/// have the stub generator add one statement that does not compile.
pub fn ablation_set() -> Vec<FixtureInstance> {
    let mut out = Vec::new();
    for mode in [Mode::Direct, Mode::Indirect] {
        for f in Family::ALL {
            for variant in 0..2 {
                out.push(instance(f, mode, variant, variant == 1));
            }
        }
    }
    out
}

fn write(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)
}

/// Writes the instances under `dir` (one sub-directory each) and returns the
/// manifest path.
pub fn write_corpus(dir: &Path, instances: &[FixtureInstance]) -> std::io::Result<std::path::PathBuf> {
    let mut entries: Vec<Value> = Vec::new();
    for inst in instances {
        let root = dir.join(&inst.instance_id);
        write(&root.join("main.rs"), &inst.main)?;
        write(&root.join("unit.rs"), &inst.unit)?;
        write(&root.join("fixed/unit.rs"), &inst.fixed_unit)?;
        let mut callers = Vec::new();
        if let Some(c) = &inst.caller {
            write(&root.join("caller.rs"), c)?;
            callers.push("caller.rs");
        }
        entries.push(json!({
            "instance_id": inst.instance_id,
            "mode": inst.mode,
            "paths": {
                "root": inst.instance_id,
                "defective": "unit.rs",
                "fixed": "fixed/unit.rs",
                "callers": callers,
                "main_file": "main.rs",
                "support": ["main.rs"],
            },
            "failing_tests": [inst.failing_test],
            "regression_tests": [inst.regression_test],
            "fault_lines": inst.fault_lines.iter().map(|l| json!({"file": "unit.rs", "line": l})).collect::<Vec<_>>(),
            "defective": true,
            "stub": inst.stub,
        }));
    }
    let manifest = json!({ "toolchain": "rustc", "instances": entries });
    let path = dir.join("manifest.json");
    write(&path, &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(path)
}
