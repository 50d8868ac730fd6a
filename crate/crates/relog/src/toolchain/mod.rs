//! Building and running programs through a configured toolchain.
//!
//! Every build happens in a throwaway workspace directory populated from a
//! [`Program`]. An instrumented unit replaces its base file in that copy;
//! nothing is ever written back to the caller's tree.

mod diagnostics;
mod mapping;
mod outcome;
pub mod process;

use std::collections::{BTreeMap, HashMap};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use relog_core::digest::sha256_hex;
use relog_core::{InstrumentedUnit, SourceUnit};
use thiserror::Error;

pub use diagnostics::{parse_diagnostics, CompileResult, CompilerDiagnostic};
pub use mapping::{relative_path, LineMapper, Mapped};
pub use outcome::{
    classify, extract_log_events, ExceptionInfo, ExecutionOutcome, Frame, LogEvent,
    OutcomeStatus, TestResult,
};

use crate::profile::{CompiledRules, ProfileError, ToolchainProfile};

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("toolchain unavailable: cannot spawn {command:?}: {source}")]
    Unavailable {
        command: String,
        source: std::io::Error,
    },
    #[error("bad command template {template:?}: {reason}")]
    Command { template: String, reason: String },
    #[error("workspace: {0}")]
    Workspace(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A multi-file program: source units plus auxiliary files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub units: Vec<SourceUnit>,
    /// Non-source files copied verbatim (relative path, contents).
    pub support: Vec<(String, String)>,
    /// Workspace-relative path substituted for `{main_file}`.
    pub main_file: String,
}

impl Program {
    pub fn single(unit: SourceUnit) -> Self {
        let main_file = unit.path.clone();
        Self { units: vec![unit], support: Vec::new(), main_file }
    }

    pub fn unit(&self, path: &str) -> Option<&SourceUnit> {
        self.units.iter().find(|u| u.path == path)
    }

    /// Copy of the program with `unit` replacing the unit at the same path.
    pub fn with_unit(&self, unit: SourceUnit) -> Self {
        let mut p = self.clone();
        match p.units.iter_mut().find(|u| u.path == unit.path) {
            Some(slot) => *slot = unit,
            None => p.units.push(unit),
        }
        p
    }

    /// Reads `files` (relative to `root`) into a program.
    pub fn load(root: &Path, files: &[String], support: &[String], main_file: &str) -> std::io::Result<Self> {
        let units = files
            .iter()
            .map(|f| Ok(SourceUnit::from_text(f.clone(), &std::fs::read_to_string(root.join(f))?)))
            .collect::<std::io::Result<Vec<_>>>()?;
        let support = support
            .iter()
            .map(|f| Ok((f.clone(), std::fs::read_to_string(root.join(f))?)))
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self { units, support, main_file: main_file.to_string() })
    }
}

/// A materialized, disposable copy of a program.
pub struct Workspace {
    dir: tempfile::TempDir,
    main_file: String,
    instrumented: Option<InstrumentedUnit>,
    /// Digest of every file written plus the instrumented line map.
    fingerprint: String,
}

impl Workspace {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn instrumented(&self) -> Option<&InstrumentedUnit> {
        self.instrumented.as_ref()
    }
}

fn safe_join(root: &Path, rel: &str) -> Result<PathBuf, ToolchainError> {
    let p = Path::new(rel);
    if rel.is_empty() || p.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
        return Err(ToolchainError::Workspace(format!("path {rel:?} escapes the workspace")));
    }
    Ok(root.join(p))
}

fn write_file(root: &Path, rel: &str, contents: &str) -> Result<(), ToolchainError> {
    let path = safe_join(root, rel)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ToolchainError::Workspace(e.to_string()))?;
    }
    std::fs::write(&path, contents).map_err(|e| ToolchainError::Workspace(format!("{}: {e}", path.display())))
}

/// A profile with its regexes compiled.
#[derive(Debug, Clone)]
pub struct Toolchain {
    pub profile: ToolchainProfile,
    rules: CompiledRules,
    /// Failed builds by workspace fingerprint. A compiler given the same
    /// inputs fails the same way, so these are not rebuilt.
    failed_builds: Arc<Mutex<HashMap<String, CompileResult>>>,
}

impl Toolchain {
    pub fn new(profile: ToolchainProfile) -> Result<Self, ToolchainError> {
        profile.validate()?;
        let rules = CompiledRules::new(&profile)?;
        Ok(Self { profile, rules, failed_builds: Arc::default() })
    }

    pub fn rules(&self) -> &CompiledRules {
        &self.rules
    }

    pub fn materialize(
        &self,
        program: &Program,
        instrumented: Option<&InstrumentedUnit>,
    ) -> Result<Workspace, ToolchainError> {
        let dir = tempfile::Builder::new()
            .prefix("relog-ws-")
            .tempdir()
            .map_err(|e| ToolchainError::Workspace(e.to_string()))?;
        let root = dir.path();
        let mut files: BTreeMap<&str, String> = BTreeMap::new();
        for f in &self.profile.workspace_template.files {
            files.insert(&f.path, f.contents.clone());
        }
        for (path, contents) in &program.support {
            files.insert(path, contents.clone());
        }
        for unit in &program.units {
            files.insert(&unit.path, unit.to_text());
        }
        if let Some(instr) = instrumented {
            if program.unit(&instr.base_path).is_none() {
                return Err(ToolchainError::Workspace(format!(
                    "instrumented unit {:?} is not part of the program",
                    instr.base_path
                )));
            }
            files.insert(&instr.base_path, instr.to_text());
        }
        let mut key = format!("{}\0{}\0", self.profile.compile_cmd, program.main_file);
        for (path, contents) in &files {
            write_file(root, path, contents)?;
            key.push_str(&format!("{path}\0{}\0{contents}\0", contents.len()));
        }
        if let Some(instr) = instrumented {
            key.push_str(&format!("{:?}", instr.line_map));
        }
        Ok(Workspace {
            dir,
            main_file: program.main_file.clone(),
            instrumented: instrumented.cloned(),
            fingerprint: sha256_hex(key.as_bytes()),
        })
    }

    fn argv(&self, template: &str, ws: &Workspace, timeout_s: f64) -> Result<Vec<String>, ToolchainError> {
        let words = shell_words::split(template).map_err(|e| ToolchainError::Command {
            template: template.to_string(),
            reason: e.to_string(),
        })?;
        let workspace = ws.path().to_string_lossy();
        let timeout = format!("{timeout_s}");
        Ok(words
            .into_iter()
            .map(|w| {
                w.replace("{workspace}", &workspace)
                    .replace("{main_file}", &ws.main_file)
                    .replace("{timeout}", &timeout)
            })
            .collect())
    }

    fn env(&self) -> BTreeMap<String, String> {
        let mut env: BTreeMap<String, String> = self
            .profile
            .env_passthrough
            .iter()
            .filter_map(|k| std::env::var(k).ok().map(|v| (k.clone(), v)))
            .collect();
        env.extend(self.profile.env_set.clone());
        env
    }

    fn spawn(&self, template: &str, ws: &Workspace, timeout_s: f64) -> Result<process::ProcessOutput, ToolchainError> {
        let argv = self.argv(template, ws, timeout_s)?;
        let env = self.env();
        process::run(&process::Invocation {
            argv: &argv,
            cwd: ws.path(),
            env: &env,
            timeout: Duration::from_secs_f64(timeout_s),
            cap: self.profile.stream_cap_bytes,
        })
        .map_err(|source| ToolchainError::Unavailable { command: argv.first().cloned().unwrap_or_default(), source })
    }

    fn mapper<'a>(&'a self, ws: &'a Workspace) -> LineMapper<'a> {
        LineMapper { workspace: ws.path(), instrumented: ws.instrumented(), render: &self.profile.render }
    }

    pub fn compile(&self, ws: &Workspace) -> Result<CompileResult, ToolchainError> {
        if self.profile.compile_cmd.trim().is_empty() {
            return Ok(CompileResult::trivial());
        }
        if let Some(known) = self.failed_builds.lock().expect("build cache").get(&ws.fingerprint) {
            return Ok(known.clone());
        }
        let out = self.spawn(&self.profile.compile_cmd, ws, self.profile.compile_timeout_s)?;
        let text = format!("{}{}", self.rules.scrub(&out.stderr.text), self.rules.scrub(&out.stdout.text));
        let diagnostics = parse_diagnostics(&text, &self.rules, &self.mapper(ws));
        let ok = out.success() && !diagnostics.iter().any(|d| d.is_error);
        let result = CompileResult { ok, diagnostics, timed_out: out.timed_out, exit_code: out.exit_code, output: text };
        if !ok && !out.timed_out {
            self.failed_builds.lock().expect("build cache").insert(ws.fingerprint.clone(), result.clone());
        }
        Ok(result)
    }

    /// Runs `test_cmd` when the profile has one, `run_cmd` otherwise.
    pub fn execute(&self, ws: &Workspace) -> Result<ExecutionOutcome, ToolchainError> {
        let template = self.profile.test_cmd.as_deref().unwrap_or(&self.profile.run_cmd);
        let out = self.spawn(template, ws, self.profile.timeout_s)?;
        Ok(classify(out, &self.rules, &self.mapper(ws), &self.profile.log_marker))
    }

    /// Materializes, compiles and (if the build succeeds) executes.
    pub fn build_and_run(
        &self,
        program: &Program,
        instrumented: Option<&InstrumentedUnit>,
    ) -> Result<(CompileResult, Option<ExecutionOutcome>), ToolchainError> {
        let ws = self.materialize(program, instrumented)?;
        let compile = self.compile(&ws)?;
        if !compile.ok {
            return Ok((compile, None));
        }
        let outcome = self.execute(&ws)?;
        Ok((compile, Some(outcome)))
    }
}
