//! Line-hunk patches proposed by a debugging agent.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Replace `old_lines` starting at 1-based `start_line` with `new_lines`.
/// An empty `old_lines` inserts before `start_line` (`len + 1` appends).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub start_line: u32,
    #[serde(default)]
    pub old_lines: Vec<String>,
    #[serde(default)]
    pub new_lines: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub hunks: Vec<Hunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("hunk at line {0} is out of range")]
    OutOfRange(u32),
    #[error("hunk at line {line} does not match the file (expected {expected:?})")]
    ContextMismatch { line: u32, expected: String },
    #[error("hunks overlap at line {0}")]
    Overlap(u32),
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Applies all hunks against the original numbering.
    pub fn apply(&self, lines: &[String]) -> Result<Vec<String>, PatchError> {
        let mut hunks: Vec<&Hunk> = self.hunks.iter().collect();
        hunks.sort_by_key(|h| h.start_line);
        let mut out = Vec::with_capacity(lines.len());
        let mut cursor = 0usize;
        for h in hunks {
            let start = (h.start_line as usize)
                .checked_sub(1)
                .ok_or(PatchError::OutOfRange(h.start_line))?;
            if start < cursor {
                return Err(PatchError::Overlap(h.start_line));
            }
            let end = start + h.old_lines.len();
            if end > lines.len() || start > lines.len() {
                return Err(PatchError::OutOfRange(h.start_line));
            }
            for (k, expected) in h.old_lines.iter().enumerate() {
                if lines[start + k] != *expected {
                    return Err(PatchError::ContextMismatch {
                        line: (start + k + 1) as u32,
                        expected: expected.clone(),
                    });
                }
            }
            out.extend_from_slice(&lines[cursor..start]);
            out.extend(h.new_lines.iter().cloned());
            cursor = end;
        }
        out.extend_from_slice(&lines[cursor..]);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn lines(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn replaces_and_inserts() {
        let base = lines(&["a", "b", "c"]);
        let patch = Patch {
            hunks: vec![
                Hunk { start_line: 2, old_lines: lines(&["b"]), new_lines: lines(&["B", "B2"]) },
                Hunk { start_line: 4, old_lines: vec![], new_lines: lines(&["d"]) },
            ],
        };
        assert_eq!(patch.apply(&base).unwrap(), lines(&["a", "B", "B2", "c", "d"]));
    }

    #[test]
    fn context_mismatch_fails() {
        let base = lines(&["a", "b"]);
        let patch = Patch {
            hunks: vec![Hunk { start_line: 1, old_lines: lines(&["x"]), new_lines: vec![] }],
        };
        assert!(matches!(patch.apply(&base), Err(PatchError::ContextMismatch { line: 1, .. })));
    }

    #[test]
    fn empty_patch_is_identity() {
        let base = lines(&["a"]);
        assert_eq!(Patch::default().apply(&base).unwrap(), base);
    }
}
