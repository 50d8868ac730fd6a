//! Benchmark manifests and instance validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use relog_core::digest::FieldHasher;
use relog_core::SourceUnit;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gateway::stub::StubConfig;
use crate::pipeline::Mode;
use crate::profile::ToolchainProfile;
use crate::toolchain::{ExecutionOutcome, Program, Toolchain, ToolchainError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryPaths {
    /// Instance directory, relative to the manifest.
    pub root: String,
    pub defective: String,
    /// The corrected version of `defective`.
    pub fixed: String,
    #[serde(default)]
    pub callers: Vec<String>,
    pub main_file: String,
    /// Files copied as-is (test driver, build files).
    #[serde(default)]
    pub support: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaultLine {
    pub file: String,
    pub line: u32,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub instance_id: String,
    pub mode: Mode,
    pub paths: EntryPaths,
    pub failing_tests: Vec<String>,
    #[serde(default)]
    pub regression_tests: Vec<String>,
    pub fault_lines: Vec<FaultLine>,
    #[serde(default = "yes")]
    pub defective: bool,
    /// Knowledge handed to the rule-based provider; ignored by the others.
    #[serde(default)]
    pub stub: StubConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// `rustc` for the built-in profile, otherwise a profile file relative
    /// to the manifest.
    #[serde(default)]
    pub toolchain: Option<String>,
    pub instances: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkInstance {
    pub instance_id: String,
    pub mode: Mode,
    /// The defective program.
    pub program: Program,
    pub defective_path: String,
    pub callers: Vec<String>,
    pub fixed_unit: SourceUnit,
    pub failing_tests: Vec<String>,
    pub regression_tests: Vec<String>,
    pub fault_lines: Vec<FaultLine>,
    pub defective: bool,
    pub stub: StubConfig,
}

impl BenchmarkInstance {
    /// The unit the generator instruments: the defective unit in direct
    /// mode, the first caller in indirect mode.
    pub fn target(&self) -> &str {
        match self.mode {
            Mode::Direct => &self.defective_path,
            Mode::Indirect => &self.callers[0],
        }
    }

    pub fn defective_unit(&self) -> &SourceUnit {
        self.program.unit(&self.defective_path).expect("defective unit is loaded")
    }

    pub fn fixed_program(&self) -> Program {
        self.program.with_unit(self.fixed_unit.clone())
    }

    /// True iff every failing and regression test passed.
    pub fn all_tests_pass(&self, outcome: &ExecutionOutcome) -> bool {
        self.failing_tests.iter().chain(&self.regression_tests).all(|t| outcome.test_passed(t) == Some(true))
    }

    /// Identity of everything validation depends on.
    pub fn digest(&self, toolchain: &ToolchainProfile) -> String {
        let mut h = FieldHasher::new();
        h.field(toolchain.name.as_bytes())
            .field(toolchain.compile_cmd.as_bytes())
            .field(toolchain.run_cmd.as_bytes())
            .field(toolchain.test_cmd.as_deref().unwrap_or("").as_bytes())
            .field(self.program.main_file.as_bytes());
        for u in &self.program.units {
            h.field(u.path.as_bytes()).field(u.to_text().as_bytes());
        }
        for (p, c) in &self.program.support {
            h.field(p.as_bytes()).field(c.as_bytes());
        }
        h.field(self.fixed_unit.to_text().as_bytes())
            .field(self.failing_tests.join("\n").as_bytes())
            .field(self.regression_tests.join("\n").as_bytes());
        h.finish_hex()
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| EvalError::ManifestInvalid(e.to_string()))
}

/// Resolves the manifest's toolchain entry.
pub fn manifest_toolchain(manifest: &Manifest, dir: &Path) -> Result<Option<ToolchainProfile>, EvalError> {
    match manifest.toolchain.as_deref() {
        None => Ok(None),
        Some("rustc") => Ok(Some(ToolchainProfile::rustc())),
        Some(p) => ToolchainProfile::load(&dir.join(p)).map(Some).map_err(|e| EvalError::ManifestInvalid(e.to_string())),
    }
}

fn check_entry(e: &ManifestEntry) -> Result<(), String> {
    if e.instance_id.trim().is_empty() {
        return Err("empty instance_id".into());
    }
    if e.mode == Mode::Indirect && e.paths.callers.is_empty() {
        return Err("indirect instance without callers".into());
    }
    if e.failing_tests.is_empty() {
        return Err("no failing tests".into());
    }
    if e.defective && e.fault_lines.is_empty() {
        return Err("defective instance without fault lines".into());
    }
    if e.paths.callers.contains(&e.paths.defective) {
        return Err("the defective unit is listed as a caller".into());
    }
    Ok(())
}

/// Reads every instance's files. Structural problems fail the whole
/// manifest.
pub fn load_instances(manifest: &Manifest, dir: &Path) -> Result<Vec<BenchmarkInstance>, EvalError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in &manifest.instances {
        let invalid = |m: String| EvalError::ManifestInvalid(format!("{}: {m}", e.instance_id));
        check_entry(e).map_err(invalid)?;
        if !seen.insert(e.instance_id.clone()) {
            return Err(invalid("duplicate instance_id".into()));
        }
        let root = dir.join(&e.paths.root);
        let mut files = vec![e.paths.defective.clone()];
        files.extend(e.paths.callers.iter().cloned());
        let program = Program::load(&root, &files, &e.paths.support, &e.paths.main_file)
            .map_err(|err| invalid(format!("cannot read sources: {err}")))?;
        let fixed_text = std::fs::read_to_string(root.join(&e.paths.fixed))
            .map_err(|err| invalid(format!("cannot read fixed unit: {err}")))?;
        out.push(BenchmarkInstance {
            instance_id: e.instance_id.clone(),
            mode: e.mode,
            program,
            defective_path: e.paths.defective.clone(),
            callers: e.paths.callers.clone(),
            fixed_unit: SourceUnit::from_text(e.paths.defective.clone(), &fixed_text),
            failing_tests: e.failing_tests.clone(),
            regression_tests: e.regression_tests.clone(),
            fault_lines: e.fault_lines.clone(),
            defective: e.defective,
            stub: e.stub.clone(),
        });
    }
    Ok(out)
}

/// Checks that an instance reproduces: the defective program builds, its
/// failing tests fail, and the fixed program passes everything.
pub fn validate_instance(inst: &BenchmarkInstance, toolchain: &Toolchain) -> Result<Result<(), String>, ToolchainError> {
    let (compile, outcome) = toolchain.build_and_run(&inst.program, None)?;
    if !compile.ok {
        return Ok(Err("the defective program does not build".into()));
    }
    let outcome = outcome.expect("built programs run");
    if let Some(t) = inst.failing_tests.iter().find(|t| outcome.test_passed(t) == Some(true)) {
        return Ok(Err(format!("failing test {t} passes before the fix")));
    }
    let (compile, outcome) = toolchain.build_and_run(&inst.fixed_program(), None)?;
    if !compile.ok {
        return Ok(Err("the fixed program does not build".into()));
    }
    let outcome = outcome.expect("built programs run");
    if !inst.all_tests_pass(&outcome) {
        return Ok(Err(format!("tests still fail after the fix: {:?}", outcome.failed_tests())));
    }
    Ok(Ok(()))
}

/// Validation results keyed by instance digest, optionally kept on disk.
#[derive(Debug, Default)]
pub struct ValidationCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, Option<String>>,
}

impl ValidationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// A missing or unreadable file starts an empty cache.
    pub fn open(path: PathBuf) -> Self {
        let entries = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        Self { path: Some(path), entries }
    }

    pub fn get(&self, digest: &str) -> Option<Result<(), String>> {
        self.entries.get(digest).map(|r| match r {
            None => Ok(()),
            Some(reason) => Err(reason.clone()),
        })
    }

    pub fn put(&mut self, digest: String, result: &Result<(), String>) {
        self.entries.insert(digest, result.as_ref().err().cloned());
    }

    pub fn save(&self) -> std::io::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(&self.entries).expect("cache serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excluded {
    pub instance_id: String,
    pub reason: String,
}

/// Validated instances plus the ones that did not reproduce.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub toolchain: Option<ToolchainProfile>,
    pub instances: Vec<BenchmarkInstance>,
    pub excluded: Vec<Excluded>,
}

/// Reads the manifest at `path` and validates each instance with
/// `toolchain` (or the manifest's own toolchain when `None`).
pub fn load_benchmark(
    path: &Path,
    toolchain: Option<&Toolchain>,
    cache: &mut ValidationCache,
) -> Result<Benchmark, EvalError> {
    let manifest = read_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let declared = manifest_toolchain(&manifest, dir)?;
    let instances = load_instances(&manifest, dir)?;
    let owned;
    let tc = match toolchain {
        Some(t) => t,
        None => {
            owned = Toolchain::new(declared.clone().unwrap_or_else(ToolchainProfile::rustc))?;
            &owned
        }
    };
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for inst in instances {
        let digest = inst.digest(&tc.profile);
        let result = match cache.get(&digest) {
            Some(r) => r,
            None => {
                let r = validate_instance(&inst, tc)?;
                cache.put(digest, &r);
                r
            }
        };
        match result {
            Ok(()) => kept.push(inst),
            Err(reason) => {
                tracing::warn!(instance = %inst.instance_id, %reason, "instance excluded");
                excluded.push(Excluded { instance_id: inst.instance_id, reason });
            }
        }
    }
    cache.save().map_err(|e| EvalError::Io(e.to_string()))?;
    Ok(Benchmark { toolchain: declared, instances: kept, excluded })
}
