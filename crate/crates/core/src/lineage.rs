//! Following logging statements through a commit history.
//!
//! The miner produces one [`FileSnapshot`] per (commit, touched file). A
//! statement in a snapshot continues an existing lineage of the same file
//! when the token Jaccard similarity of the normalized statements reaches
//! the threshold; ties go to the nearest line.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Default Jaccard threshold for continuing a lineage.
pub const DEFAULT_THETA: f64 = 0.7;

/// Label of the bucket scheme used by [`frequency_report`].
pub const BUCKET_SCHEME: &str = "1,2,>=3";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementSighting {
    pub commit_id: String,
    /// Position of the commit in traversal order.
    pub commit_index: u32,
    pub path: String,
    pub line: u32,
    pub api_name: String,
    pub normalized_template: String,
}

/// All statements found in one file at one commit that touched it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSnapshot {
    pub commit_index: u32,
    pub commit_id: String,
    /// Stable identity of the file across renames.
    pub file_key: String,
    pub path: String,
    pub deleted: bool,
    pub sightings: Vec<StatementSighting>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementLineage {
    pub lineage_id: u32,
    pub file_key: String,
    pub sightings: Vec<StatementSighting>,
    pub change_count: u32,
}

impl StatementLineage {
    fn latest(&self) -> &StatementSighting {
        self.sightings.last().expect("lineage always has a sighting")
    }

    fn recount(&mut self) {
        let mut changes = 0;
        for pair in self.sightings.windows(2) {
            if pair[0].normalized_template != pair[1].normalized_template {
                changes += 1;
            }
        }
        self.change_count = changes;
    }
}

/// Normalizes a statement's text: string literals stay verbatim, everything
/// else is split into identifier, number and punctuation tokens separated by
/// single spaces.
pub fn normalize_statement(text: &str) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        if c == '"' {
            let mut lit = String::from('"');
            let mut escaped = false;
            for n in chars.by_ref() {
                lit.push(n);
                if escaped {
                    escaped = false;
                } else if n == '\\' {
                    escaped = true;
                } else if n == '"' {
                    break;
                }
            }
            out.push(lit);
        } else if c.is_alphanumeric() || c == '_' {
            let mut word = String::from(c);
            while let Some(&n) = chars.peek() {
                if n.is_alphanumeric() || n == '_' {
                    word.push(n);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(word);
        } else {
            out.push(c.to_string());
        }
    }
    out.join(" ")
}

/// Token set used for similarity: identifiers, numbers and the words inside
/// string literals. Punctuation is ignored.
pub fn similarity_tokens(normalized: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    let mut rest = normalized;
    while !rest.is_empty() {
        rest = rest.trim_start();
        if let Some(body) = rest.strip_prefix('"') {
            let end = closing_quote(body);
            for w in body[..end].split_whitespace() {
                set.insert(w.to_string());
            }
            rest = body.get(end + 1..).unwrap_or("");
            continue;
        }
        let end = rest.find(' ').unwrap_or(rest.len());
        let tok = &rest[..end];
        if tok.chars().any(|c| c.is_alphanumeric() || c == '_') {
            set.insert(tok.to_string());
        }
        rest = &rest[end..];
    }
    set
}

fn closing_quote(body: &str) -> usize {
    let mut escaped = false;
    for (i, c) in body.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return i;
        }
    }
    body.len()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Groups consecutive sightings of the same (commit, path) into snapshots.
/// Use this when only sightings are available; files touched without any
/// statement then go unnoticed.
pub fn snapshots_from_sightings(sightings: &[StatementSighting]) -> Vec<FileSnapshot> {
    let mut out: Vec<FileSnapshot> = Vec::new();
    for s in sightings {
        match out.last_mut() {
            Some(last) if last.commit_index == s.commit_index && last.path == s.path => {
                last.sightings.push(s.clone());
            }
            _ => out.push(FileSnapshot {
                commit_index: s.commit_index,
                commit_id: s.commit_id.clone(),
                file_key: s.path.clone(),
                path: s.path.clone(),
                deleted: false,
                sightings: alloc::vec![s.clone()],
            }),
        }
    }
    out
}

/// Builds lineages from snapshots given in traversal order.
pub fn track_lineages(snapshots: &[FileSnapshot], theta: f64) -> Vec<StatementLineage> {
    let mut lineages: Vec<StatementLineage> = Vec::new();
    // file_key -> indices of lineages still present in that file.
    let mut active: BTreeMap<String, Vec<usize>> = BTreeMap::new();

    for snap in snapshots {
        let current = active.remove(&snap.file_key).unwrap_or_default();
        if snap.deleted {
            continue;
        }
        let new_tokens: Vec<BTreeSet<String>> = snap
            .sightings
            .iter()
            .map(|s| similarity_tokens(&s.normalized_template))
            .collect();

        let mut pairs = Vec::new();
        for &li in &current {
            let latest = lineages[li].latest();
            let old = similarity_tokens(&latest.normalized_template);
            for (si, tokens) in new_tokens.iter().enumerate() {
                let score = jaccard(&old, tokens);
                if score + 1e-12 >= theta {
                    let distance = latest.line.abs_diff(snap.sightings[si].line);
                    pairs.push((score, distance, li, si));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });

        let mut lineage_taken = BTreeSet::new();
        let mut sighting_taken = alloc::vec![false; snap.sightings.len()];
        let mut still_active = Vec::new();
        for (_, _, li, si) in pairs {
            if lineage_taken.contains(&li) || sighting_taken[si] {
                continue;
            }
            lineage_taken.insert(li);
            sighting_taken[si] = true;
            lineages[li].sightings.push(snap.sightings[si].clone());
            lineages[li].recount();
            still_active.push(li);
        }
        for (si, taken) in sighting_taken.iter().enumerate() {
            if !taken {
                let id = lineages.len();
                lineages.push(StatementLineage {
                    lineage_id: id as u32,
                    file_key: snap.file_key.clone(),
                    sightings: alloc::vec![snap.sightings[si].clone()],
                    change_count: 0,
                });
                still_active.push(id);
            }
        }
        still_active.sort_unstable();
        active.insert(snap.file_key.clone(), still_active);
    }
    lineages
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub label: String,
    pub count: u32,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDistribution {
    pub lineage_count: u32,
    pub modified_count: u32,
    /// Fraction of all lineages changed at least once.
    pub modified_share: f64,
    /// Percentages over modified lineages; empty when nothing changed.
    pub buckets: Vec<Bucket>,
    pub bucket_scheme: String,
}

impl FrequencyDistribution {
    pub fn percent(&self, label: &str) -> Option<f64> {
        self.buckets
            .iter()
            .find(|b| b.label == label)
            .map(|b| b.percent)
    }
}

/// Change-frequency distribution with buckets `1`, `2` and `>=3`.
pub fn frequency_report<'a>(
    change_counts: impl IntoIterator<Item = &'a StatementLineage>,
) -> FrequencyDistribution {
    distribution_of(change_counts.into_iter().map(|l| l.change_count))
}

pub fn distribution_of(counts: impl IntoIterator<Item = u32>) -> FrequencyDistribution {
    let mut total = 0u32;
    let mut tallies = [0u32; 3];
    for c in counts {
        total += 1;
        match c {
            0 => {}
            1 => tallies[0] += 1,
            2 => tallies[1] += 1,
            _ => tallies[2] += 1,
        }
    }
    let modified: u32 = tallies.iter().sum();
    let buckets = if modified == 0 {
        Vec::new()
    } else {
        ["1", "2", ">=3"]
            .iter()
            .zip(tallies)
            .map(|(label, count)| Bucket {
                label: label.to_string(),
                count,
                percent: 100.0 * f64::from(count) / f64::from(modified),
            })
            .collect()
    };
    FrequencyDistribution {
        lineage_count: total,
        modified_count: modified,
        modified_share: if total == 0 {
            0.0
        } else {
            f64::from(modified) / f64::from(total)
        },
        buckets,
        bucket_scheme: BUCKET_SCHEME.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn sighting(commit: u32, line: u32, text: &str) -> StatementSighting {
        StatementSighting {
            commit_id: format!("c{commit}"),
            commit_index: commit,
            path: "A.java".into(),
            line,
            api_name: "LOG.info".into(),
            normalized_template: normalize_statement(text),
        }
    }

    #[test]
    fn normalization_keeps_literals_and_splits_code() {
        assert_eq!(
            normalize_statement(r#"LOG.info("Started  {}",port);"#),
            r#"LOG . info ( "Started  {}" , port ) ;"#
        );
    }

    #[test]
    fn identical_statement_is_one_lineage() {
        let text = r#"LOG.info("server started on port {}", port);"#;
        let snaps = snapshots_from_sightings(&[
            sighting(0, 5, text),
            sighting(1, 6, text),
            sighting(2, 9, text),
        ]);
        let l = track_lineages(&snaps, DEFAULT_THETA);
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].change_count, 0);
        assert_eq!(l[0].sightings.len(), 3);
    }

    #[test]
    fn one_word_edit_counts_once() {
        let a = r#"LOG.info("server started on port {} for host {}", port, host);"#;
        let b = r#"LOG.info("server launched on port {} for host {}", port, host);"#;
        let snaps = snapshots_from_sightings(&[sighting(0, 5, a), sighting(1, 5, b), sighting(2, 5, b)]);
        let l = track_lineages(&snaps, DEFAULT_THETA);
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].change_count, 1);
    }

    #[test]
    fn unrelated_statements_split() {
        let a = r#"LOG.info("server started on port {}", port);"#;
        let b = r#"LOG.warn("cache eviction failed for key {}", key);"#;
        let ta = similarity_tokens(&normalize_statement(a));
        let tb = similarity_tokens(&normalize_statement(b));
        assert!(jaccard(&ta, &tb) < DEFAULT_THETA);
        let snaps = snapshots_from_sightings(&[
            sighting(0, 5, a),
            sighting(0, 9, b),
            sighting(1, 5, a),
            sighting(1, 9, b),
        ]);
        let l = track_lineages(&snaps, DEFAULT_THETA);
        assert_eq!(l.len(), 2);
        assert!(l.iter().all(|x| x.change_count == 0 && x.sightings.len() == 2));
    }

    #[test]
    fn deleted_file_ends_lineages() {
        let text = r#"LOG.info("x is {}", x);"#;
        let mut snaps = snapshots_from_sightings(&[sighting(0, 1, text)]);
        snaps.push(FileSnapshot {
            commit_index: 1,
            commit_id: "c1".into(),
            file_key: "A.java".into(),
            path: "A.java".into(),
            deleted: true,
            sightings: vec![],
        });
        snaps.extend(snapshots_from_sightings(&[sighting(2, 1, text)]));
        assert_eq!(track_lineages(&snaps, DEFAULT_THETA).len(), 2);
    }

    #[test]
    fn distribution_examples() {
        let d = distribution_of([0, 0, 1]);
        assert!((d.modified_share - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(d.percent("1"), Some(100.0));
        let d = distribution_of([1, 2, 3, 5]);
        assert_eq!(d.percent("1"), Some(25.0));
        assert_eq!(d.percent("2"), Some(25.0));
        assert_eq!(d.percent(">=3"), Some(50.0));
        let d = distribution_of([]);
        assert_eq!(d.modified_share, 0.0);
        assert!(d.buckets.is_empty());
    }
}
