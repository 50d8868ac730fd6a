//! Logging-statement evolution in a repository's history.
//!
//! History comes from the `git` command line: first-parent commits oldest
//! first, with rename detection so that a moved file keeps its statements'
//! lineages.

pub mod extract;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use regex::Regex;
use relog_core::lineage::{
    frequency_report, normalize_statement, track_lineages, FileSnapshot, FrequencyDistribution,
    StatementLineage, StatementSighting, DEFAULT_THETA,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{default_patterns, find_calls, FoundCall};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("repository unreadable: {0}")]
    RepoUnreadable(String),
    #[error("invalid pattern {pattern:?}: {reason}")]
    Pattern { pattern: String, reason: String },
    #[error("no patterns configured")]
    NoPatterns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub patterns: Vec<String>,
    /// File extensions scanned, without the dot.
    pub extensions: Vec<String>,
    pub theta: f64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            patterns: default_patterns(),
            extensions: vec!["java".into(), "rs".into()],
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Change {
    Modified(String),
    Deleted(String),
    Renamed { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Commit {
    id: String,
    changes: Vec<Change>,
}

fn git(repo: &Path, args: &[&str]) -> Result<String, MinerError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .output()
        .map_err(|e| MinerError::RepoUnreadable(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(MinerError::RepoUnreadable(String::from_utf8_lossy(&out.stderr).trim().to_string()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn has_head(repo: &Path) -> bool {
    Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["rev-parse", "--verify", "--quiet", "HEAD"])
        .output()
        .is_ok_and(|o| o.status.success())
}

fn parse_log(text: &str) -> Vec<Commit> {
    let mut commits: Vec<Commit> = Vec::new();
    for line in text.lines() {
        if let Some(id) = line.strip_prefix("commit ") {
            commits.push(Commit { id: id.trim().to_string(), changes: Vec::new() });
            continue;
        }
        let Some(commit) = commits.last_mut() else { continue };
        let parts: Vec<&str> = line.split('\t').collect();
        let change = match parts.as_slice() {
            [s, p] if s.starts_with('D') => Change::Deleted(p.to_string()),
            [s, p] if s.starts_with(['A', 'M', 'T']) => Change::Modified(p.to_string()),
            [s, from, to] if s.starts_with('R') => Change::Renamed { from: from.to_string(), to: to.to_string() },
            [s, _, to] if s.starts_with('C') => Change::Modified(to.to_string()),
            _ => continue,
        };
        commit.changes.push(change);
    }
    commits
}

fn first_parent_history(repo: &Path) -> Result<Vec<Commit>, MinerError> {
    git(repo, &["rev-parse", "--git-dir"])?;
    if !has_head(repo) {
        return Ok(Vec::new());
    }
    let log = git(
        repo,
        &[
            "log",
            "--first-parent",
            "--reverse",
            "--diff-merges=first-parent",
            "--name-status",
            "-M",
            "--no-color",
            "--format=commit %H",
        ],
    )?;
    Ok(parse_log(&log))
}

/// All statements of every touched file at every first-parent commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scan {
    pub commits: Vec<String>,
    pub snapshots: Vec<FileSnapshot>,
}

impl Scan {
    pub fn sightings(&self) -> impl Iterator<Item = &StatementSighting> {
        self.snapshots.iter().flat_map(|s| s.sightings.iter())
    }
}

fn compile(patterns: &[String]) -> Result<Vec<Regex>, MinerError> {
    if patterns.is_empty() {
        return Err(MinerError::NoPatterns);
    }
    patterns
        .iter()
        .map(|p| Regex::new(p).map_err(|e| MinerError::Pattern { pattern: p.clone(), reason: e.to_string() }))
        .collect()
}

pub fn scan_repository(repo: &Path, config: &MinerConfig) -> Result<Scan, MinerError> {
    let patterns = compile(&config.patterns)?;
    let wanted = |p: &str| {
        Path::new(p).extension().and_then(|e| e.to_str()).is_some_and(|e| config.extensions.iter().any(|x| x == e))
    };
    let history = first_parent_history(repo)?;
    // path -> stable key, following renames.
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut snapshots = Vec::new();
    let mut commits = Vec::new();
    for (index, commit) in history.iter().enumerate() {
        let index = index as u32;
        commits.push(commit.id.clone());
        for change in &commit.changes {
            let (path, deleted) = match change {
                Change::Modified(p) => (p.clone(), false),
                Change::Deleted(p) => (p.clone(), true),
                Change::Renamed { from, to } => {
                    let key = keys.remove(from).unwrap_or_else(|| from.clone());
                    keys.insert(to.clone(), key);
                    (to.clone(), false)
                }
            };
            if !wanted(&path) {
                continue;
            }
            let file_key = keys.entry(path.clone()).or_insert_with(|| format!("{path}@{index}")).clone();
            if deleted {
                keys.remove(&path);
                snapshots.push(FileSnapshot {
                    commit_index: index,
                    commit_id: commit.id.clone(),
                    file_key,
                    path,
                    deleted: true,
                    sightings: Vec::new(),
                });
                continue;
            }
            let text = git(repo, &["show", &format!("{}:{}", commit.id, path)])?;
            let sightings = find_calls(&text, &patterns)
                .into_iter()
                .map(|c| StatementSighting {
                    commit_id: commit.id.clone(),
                    commit_index: index,
                    path: path.clone(),
                    line: c.line,
                    api_name: c.api_name,
                    normalized_template: normalize_statement(&c.text),
                })
                .collect();
            snapshots.push(FileSnapshot { commit_index: index, commit_id: commit.id.clone(), file_key, path, deleted: false, sightings });
        }
    }
    Ok(Scan { commits, snapshots })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineReport {
    pub project: String,
    pub commits: usize,
    pub sightings: usize,
    pub lineage_count: u32,
    pub modified_share: f64,
    pub distribution: FrequencyDistribution,
    pub theta: f64,
    pub patterns: Vec<String>,
    /// Share of modified lineages at a few other thresholds.
    pub theta_sensitivity: Vec<(f64, f64)>,
}

pub struct Mined {
    pub report: MineReport,
    pub lineages: Vec<StatementLineage>,
}

pub const SENSITIVITY_THETAS: [f64; 3] = [0.5, 0.7, 0.9];

pub fn mine(repo: &Path, config: &MinerConfig) -> Result<Mined, MinerError> {
    let scan = scan_repository(repo, config)?;
    let lineages = track_lineages(&scan.snapshots, config.theta);
    let distribution = frequency_report(&lineages);
    let theta_sensitivity = SENSITIVITY_THETAS
        .iter()
        .map(|&t| (t, frequency_report(&track_lineages(&scan.snapshots, t)).modified_share))
        .collect();
    let project = std::fs::canonicalize(repo)
        .unwrap_or_else(|_| PathBuf::from(repo))
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Mined {
        report: MineReport {
            project,
            commits: scan.commits.len(),
            sightings: scan.sightings().count(),
            lineage_count: distribution.lineage_count,
            modified_share: distribution.modified_share,
            distribution,
            theta: config.theta,
            patterns: config.patterns.clone(),
            theta_sensitivity,
        },
        lineages,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per lineage: id, file key, first and last path, first and last
/// commit index, sightings, change count, latest statement.
pub fn lineages_csv(lineages: &[StatementLineage]) -> String {
    let mut out = String::from("lineage_id,file_key,first_path,last_path,first_commit,last_commit,sightings,change_count,latest\n");
    for l in lineages {
        let (first, last) = (&l.sightings[0], l.sightings.last().expect("non-empty lineage"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            l.lineage_id,
            csv_field(&l.file_key),
            csv_field(&first.path),
            csv_field(&last.path),
            first.commit_index,
            last.commit_index,
            l.sightings.len(),
            l.change_count,
            csv_field(&last.normalized_template),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_name_status_log() {
        let log = "commit aaa\n\nA\tsrc/A.java\nM\tREADME\n\ncommit bbb\n\nR087\tsrc/A.java\tsrc/B.java\nD\tsrc/C.java\n";
        let commits = parse_log(log);
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].changes, vec![Change::Modified("src/A.java".into()), Change::Modified("README".into())]);
        assert_eq!(
            commits[1].changes,
            vec![
                Change::Renamed { from: "src/A.java".into(), to: "src/B.java".into() },
                Change::Deleted("src/C.java".into())
            ]
        );
    }

    #[test]
    fn csv_quotes_fields() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
