//! Toolchain profiles: how to build and run a program and how to read its output.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use relog_core::RenderProfile;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default per-stream capture cap (256 KiB).
pub const DEFAULT_STREAM_CAP: usize = 256 * 1024;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse profile {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid regex in {field}: {source}")]
    Regex {
        field: &'static str,
        source: regex::Error,
    },
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// Extra files written into every workspace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceTemplate {
    #[serde(default)]
    pub files: Vec<TemplateFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateFile {
    pub path: String,
    pub contents: String,
}

/// Line rule for compiler output. Named groups: `file`, `line`, `message`,
/// optionally `severity` and `code`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRule {
    pub pattern: String,
    /// Values of the `severity` group that count as errors. A rule without a
    /// `severity` group always yields errors.
    #[serde(default = "default_error_levels")]
    pub error_levels: Vec<String>,
}

fn default_error_levels() -> Vec<String> {
    vec!["error".into()]
}

/// Recognizes an uncaught exception or panic in a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionRule {
    /// Header line. Optional named groups: `type`, `message`, `file`, `line`.
    pub header: String,
    /// Take the message from the line after the header.
    #[serde(default)]
    pub message_next_line: bool,
    #[serde(default)]
    pub default_type: Option<String>,
    /// Stack frame lines following the header (groups `file`, `line`).
    #[serde(default)]
    pub frame: Option<String>,
}

/// Per-test result lines. Named groups `name` and `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReportRule {
    pub pattern: String,
    pub pass_status: String,
}

/// Regex replacement applied to captured streams (e.g. to drop thread ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrubRule {
    pub pattern: String,
    pub replace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolchainProfile {
    pub name: String,
    #[serde(default)]
    pub workspace_template: WorkspaceTemplate,
    /// Empty for interpreted targets: compilation then trivially succeeds.
    #[serde(default)]
    pub compile_cmd: String,
    pub run_cmd: String,
    /// When set, executions run this instead of `run_cmd`.
    #[serde(default)]
    pub test_cmd: Option<String>,
    pub timeout_s: f64,
    #[serde(default = "default_compile_timeout")]
    pub compile_timeout_s: f64,
    #[serde(default)]
    pub diagnostic_patterns: Vec<DiagnosticRule>,
    #[serde(default)]
    pub exception_patterns: Vec<ExceptionRule>,
    #[serde(default)]
    pub test_report: Option<TestReportRule>,
    pub log_marker: String,
    #[serde(default)]
    pub env_passthrough: Vec<String>,
    #[serde(default)]
    pub env_set: BTreeMap<String, String>,
    #[serde(default)]
    pub scrub: Vec<ScrubRule>,
    #[serde(default = "default_cap")]
    pub stream_cap_bytes: usize,
    pub render: RenderProfile,
}

fn default_compile_timeout() -> f64 {
    120.0
}

fn default_cap() -> usize {
    DEFAULT_STREAM_CAP
}

impl ToolchainProfile {
    /// Single-crate Rust programs built with plain `rustc`.
    ///
    /// Unreachable code is promoted to an error so that a statement placed
    /// after a `return` fails the build.
    pub fn rustc() -> Self {
        let mut env_set = BTreeMap::new();
        env_set.insert("RUST_BACKTRACE".into(), "0".into());
        Self {
            name: "rustc".into(),
            workspace_template: WorkspaceTemplate::default(),
            compile_cmd: "rustc --edition 2021 -A dead_code -A unused -D unreachable_code --error-format=short -o prog {main_file}".into(),
            run_cmd: "{workspace}/prog".into(),
            test_cmd: None,
            timeout_s: 10.0,
            compile_timeout_s: default_compile_timeout(),
            diagnostic_patterns: vec![DiagnosticRule {
                pattern: r"^(?P<file>[^:\s]+):(?P<line>\d+):(?P<col>\d+): (?P<severity>error|warning)(?:\[(?P<code>\w+)\])?: (?P<message>.*)$".into(),
                error_levels: default_error_levels(),
            }],
            exception_patterns: vec![
                ExceptionRule {
                    header: r"^thread '[^']*'(?: \(\d+\))? panicked at (?P<file>[^:\s]+):(?P<line>\d+):\d+:$".into(),
                    message_next_line: true,
                    default_type: Some("panic".into()),
                    frame: None,
                },
                ExceptionRule {
                    header: r"^thread '[^']*'(?: \(\d+\))? panicked at '(?P<message>.*)', (?P<file>[^:\s]+):(?P<line>\d+):\d+$".into(),
                    message_next_line: false,
                    default_type: Some("panic".into()),
                    frame: None,
                },
            ],
            test_report: Some(TestReportRule {
                pattern: r"^test (?P<name>\S+) \.\.\. (?P<status>ok|FAILED)$".into(),
                pass_status: "ok".into(),
            }),
            log_marker: "RELOG".into(),
            env_passthrough: ["PATH", "HOME", "RUSTUP_HOME", "CARGO_HOME", "RUSTUP_TOOLCHAIN", "TMPDIR"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            env_set,
            scrub: vec![ScrubRule {
                pattern: r"thread '([^']*)' \(\d+\)".into(),
                replace: "thread '$1'".into(),
            }],
            stream_cap_bytes: DEFAULT_STREAM_CAP,
            render: RenderProfile::rust(),
        }
    }

    /// Loads a TOML or JSON profile (by extension; TOML otherwise).
    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parse_err = |message: String| ProfileError::Parse {
            path: path.display().to_string(),
            message,
        };
        let profile: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if [self.timeout_s, self.compile_timeout_s].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(ProfileError::Invalid("timeouts must be positive".into()));
        }
        if self.run_cmd.trim().is_empty() {
            return Err(ProfileError::Invalid("run_cmd is empty".into()));
        }
        if self.log_marker.is_empty() {
            return Err(ProfileError::Invalid("log_marker is empty".into()));
        }
        if self.log_marker != self.render.log_marker {
            return Err(ProfileError::Invalid(format!(
                "log_marker {:?} differs from render.log_marker {:?}",
                self.log_marker, self.render.log_marker
            )));
        }
        CompiledRules::new(self).map(|_| ())
    }
}

/// Regexes of a profile, compiled once.
#[derive(Debug, Clone)]
pub struct CompiledRules {
    pub diagnostics: Vec<(Regex, Vec<String>)>,
    pub exceptions: Vec<CompiledException>,
    pub test_report: Option<(Regex, String)>,
    pub scrub: Vec<(Regex, String)>,
    pub method: Regex,
}

#[derive(Debug, Clone)]
pub struct CompiledException {
    pub header: Regex,
    pub message_next_line: bool,
    pub default_type: Option<String>,
    pub frame: Option<Regex>,
}

impl CompiledRules {
    pub fn new(profile: &ToolchainProfile) -> Result<Self, ProfileError> {
        let re = |field: &'static str, p: &str| {
            Regex::new(p).map_err(|source| ProfileError::Regex { field, source })
        };
        Ok(Self {
            diagnostics: profile
                .diagnostic_patterns
                .iter()
                .map(|d| Ok((re("diagnostic_patterns", &d.pattern)?, d.error_levels.clone())))
                .collect::<Result<_, ProfileError>>()?,
            exceptions: profile
                .exception_patterns
                .iter()
                .map(|e| {
                    Ok(CompiledException {
                        header: re("exception_patterns.header", &e.header)?,
                        message_next_line: e.message_next_line,
                        default_type: e.default_type.clone(),
                        frame: e
                            .frame
                            .as_deref()
                            .map(|f| re("exception_patterns.frame", f))
                            .transpose()?,
                    })
                })
                .collect::<Result<_, ProfileError>>()?,
            test_report: profile
                .test_report
                .as_ref()
                .map(|t| Ok::<_, ProfileError>((re("test_report", &t.pattern)?, t.pass_status.clone())))
                .transpose()?,
            scrub: profile
                .scrub
                .iter()
                .map(|s| Ok((re("scrub", &s.pattern)?, s.replace.clone())))
                .collect::<Result<_, ProfileError>>()?,
            method: re("render.method_pattern", &profile.render.method_pattern)?,
        })
    }

    pub fn scrub(&self, text: &str) -> String {
        let mut out = text.to_string();
        for (re, rep) in &self.scrub {
            out = re.replace_all(&out, rep.as_str()).into_owned();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rustc_profile_matches_preset() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles/rustc.toml");
        let loaded = ToolchainProfile::load(&path).unwrap();
        assert_eq!(loaded, ToolchainProfile::rustc());
    }

    #[test]
    fn json_profile_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(&path, serde_json::to_string(&ToolchainProfile::rustc()).unwrap()).unwrap();
        assert_eq!(ToolchainProfile::load(&path).unwrap(), ToolchainProfile::rustc());
    }

    #[test]
    fn rejects_nonpositive_timeout_and_bad_regex() {
        let mut p = ToolchainProfile::rustc();
        p.timeout_s = 0.0;
        assert!(matches!(p.validate(), Err(ProfileError::Invalid(_))));
        let mut p = ToolchainProfile::rustc();
        p.diagnostic_patterns[0].pattern = "(".into();
        assert!(matches!(p.validate(), Err(ProfileError::Regex { .. })));
    }

    #[test]
    fn scrub_removes_thread_ids() {
        let rules = CompiledRules::new(&ToolchainProfile::rustc()).unwrap();
        assert_eq!(
            rules.scrub("thread 'main' (749) panicked at a.rs:1:2:"),
            "thread 'main' panicked at a.rs:1:2:"
        );
    }
}
