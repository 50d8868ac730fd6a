//! Sufficiency rubric and the verdicts the critic returns.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LoggingPlan;

pub const TRACEABILITY: &str = "traceability";
pub const STATE_VISIBILITY: &str = "state_visibility";
pub const CAUSAL_LINKAGE: &str = "causal_linkage";

/// Highest score a rubric dimension can take.
pub const MAX_SCORE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackAction {
    Add,
    Remove,
    Modify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackItem {
    pub action: FeedbackAction,
    #[serde(default)]
    pub target_anchor: Option<u32>,
    /// Variable, expression or reason the item is about.
    pub subject: String,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerdictError {
    #[error("score {score} for {dimension} exceeds {MAX_SCORE}")]
    ScoreRange { dimension: String, score: u8 },
    #[error("{action:?} feedback must name an existing anchor (got {anchor:?})")]
    DanglingTarget {
        action: FeedbackAction,
        anchor: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticVerdict {
    pub traceability: u8,
    pub state_visibility: u8,
    pub causal_linkage: u8,
    /// Scores for additional rubric dimensions, keyed by dimension name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, u8>,
    #[serde(default)]
    pub sufficient: bool,
    #[serde(default)]
    pub feedback: Vec<FeedbackItem>,
    #[serde(default)]
    pub rationale: String,
}

impl CriticVerdict {
    pub fn score(&self, dimension: &str) -> u8 {
        match dimension {
            TRACEABILITY => self.traceability,
            STATE_VISIBILITY => self.state_visibility,
            CAUSAL_LINKAGE => self.causal_linkage,
            other => self.extra.get(other).copied().unwrap_or(0),
        }
    }

    /// Range checks plus: remove/modify feedback must target a planned anchor.
    pub fn validate(&self, plan: &LoggingPlan) -> Result<(), VerdictError> {
        let named = [
            (TRACEABILITY, self.traceability),
            (STATE_VISIBILITY, self.state_visibility),
            (CAUSAL_LINKAGE, self.causal_linkage),
        ];
        for (dimension, score) in named
            .into_iter()
            .chain(self.extra.iter().map(|(k, v)| (k.as_str(), *v)))
        {
            if score > MAX_SCORE {
                return Err(VerdictError::ScoreRange {
                    dimension: dimension.to_string(),
                    score,
                });
            }
        }
        for item in &self.feedback {
            if matches!(item.action, FeedbackAction::Remove | FeedbackAction::Modify) {
                let exists = item
                    .target_anchor
                    .is_some_and(|a| plan.statements.iter().any(|s| s.anchor_line == a));
                if !exists {
                    return Err(VerdictError::DanglingTarget {
                        action: item.action,
                        anchor: item.target_anchor,
                    });
                }
            }
        }
        Ok(())
    }

    /// Recomputes `sufficient` from the scores. An insufficient verdict with
    /// no feedback gets one `add` item aimed at its weakest dimension.
    pub fn apply_rule(&mut self, rubric: &Rubric, rule: &SufficiencyRule) {
        let scores: Vec<(String, u8)> = rubric
            .dimensions
            .iter()
            .map(|d| (d.name.clone(), self.score(&d.name)))
            .collect();
        self.sufficient = rule.judge(scores.iter().map(|(_, s)| *s));
        if !self.sufficient && self.feedback.is_empty() {
            let weakest = scores
                .iter()
                .min_by_key(|(_, s)| *s)
                .map(|(n, _)| n.clone())
                .unwrap_or_else(|| TRACEABILITY.to_string());
            self.feedback.push(FeedbackItem {
                action: FeedbackAction::Add,
                target_anchor: None,
                subject: weakest.clone(),
                detail: format!("logs are weak on {weakest}"),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub question: String,
}

/// The set of dimensions the critic scores. Extensible beyond the default three.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub dimensions: Vec<Dimension>,
}

impl Default for Rubric {
    fn default() -> Self {
        let dim = |name: &str, question: &str| Dimension {
            name: name.to_string(),
            question: question.to_string(),
        };
        Self {
            dimensions: alloc::vec![
                dim(
                    TRACEABILITY,
                    "Do the logs show which execution path led to the observed behavior?",
                ),
                dim(
                    STATE_VISIBILITY,
                    "Are the key variables and intermediate values on that path recorded?",
                ),
                dim(
                    CAUSAL_LINKAGE,
                    "Do the logs explain why the behavior happened, not only that it happened?",
                ),
            ],
        }
    }
}

impl Rubric {
    /// Adds a dimension, replacing one with the same name.
    pub fn with_dimension(mut self, name: &str, question: &str) -> Self {
        self.dimensions.retain(|d| d.name != name);
        self.dimensions.push(Dimension {
            name: name.to_string(),
            question: question.to_string(),
        });
        self
    }

    /// Plain-text rubric for prompts.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (i, d) in self.dimensions.iter().enumerate() {
            out.push_str(&format!(
                "{}. {} (score 0-{MAX_SCORE}): {}\n",
                i + 1,
                d.name,
                d.question
            ));
        }
        out
    }
}

/// Threshold rule: every score ≥ `min_each` and at least `min_full` scores at
/// `full_score`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SufficiencyRule {
    pub min_each: u8,
    pub full_score: u8,
    pub min_full: usize,
}

impl Default for SufficiencyRule {
    fn default() -> Self {
        Self {
            min_each: 1,
            full_score: MAX_SCORE,
            min_full: 2,
        }
    }
}

impl SufficiencyRule {
    pub fn judge(&self, scores: impl IntoIterator<Item = u8>) -> bool {
        let mut full = 0;
        for s in scores {
            if s < self.min_each {
                return false;
            }
            if s >= self.full_score {
                full += 1;
            }
        }
        full >= self.min_full
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LoggingStatement, Position, Severity};
    use alloc::vec;

    fn verdict(t: u8, s: u8, c: u8) -> CriticVerdict {
        CriticVerdict {
            traceability: t,
            state_visibility: s,
            causal_linkage: c,
            extra: BTreeMap::new(),
            sufficient: false,
            feedback: vec![],
            rationale: String::new(),
        }
    }

    #[test]
    fn default_rule_truth_table() {
        let rule = SufficiencyRule::default();
        // Exhaustive over the 27 score triples.
        for t in 0..=2u8 {
            for s in 0..=2u8 {
                for c in 0..=2u8 {
                    let all_nonzero = t >= 1 && s >= 1 && c >= 1;
                    let twos = [t, s, c].iter().filter(|x| **x == 2).count();
                    assert_eq!(rule.judge([t, s, c]), all_nonzero && twos >= 2, "{t}{s}{c}");
                }
            }
        }
    }

    #[test]
    fn insufficient_verdict_gets_feedback() {
        let mut v = verdict(2, 0, 1);
        v.apply_rule(&Rubric::default(), &SufficiencyRule::default());
        assert!(!v.sufficient);
        assert_eq!(v.feedback.len(), 1);
        assert_eq!(v.feedback[0].subject, STATE_VISIBILITY);
    }

    #[test]
    fn extra_dimension_participates() {
        let rubric = Rubric::default().with_dimension("latency", "Is timing logged?");
        let mut v = verdict(2, 2, 2);
        v.apply_rule(&rubric, &SufficiencyRule::default());
        assert!(!v.sufficient, "missing extra score counts as 0");
        v.extra.insert("latency".into(), 1);
        v.feedback.clear();
        v.apply_rule(&rubric, &SufficiencyRule::default());
        assert!(v.sufficient);
    }

    #[test]
    fn remove_feedback_must_target_existing_anchor() {
        let plan = LoggingPlan::with_statements(
            "p",
            0,
            vec![LoggingStatement::new(4, Position::Before, Severity::Info, "x", vec![])],
        );
        let mut v = verdict(1, 1, 1);
        v.feedback.push(FeedbackItem {
            action: FeedbackAction::Remove,
            target_anchor: Some(5),
            subject: "noise".into(),
            detail: String::new(),
        });
        assert!(v.validate(&plan).is_err());
        v.feedback[0].target_anchor = Some(4);
        assert!(v.validate(&plan).is_ok());
        v.causal_linkage = 3;
        assert!(matches!(v.validate(&plan), Err(VerdictError::ScoreRange { .. })));
    }
}
