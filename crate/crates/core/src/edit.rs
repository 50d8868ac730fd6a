//! Plan edits produced by the refiner: add, remove or modify statements.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::normalize_plan;
use crate::model::{LoggingPlan, LoggingStatement, ModelError, Position, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditAction {
    Add,
    Remove,
    Modify,
}

/// One edit against a plan. Remove and modify address statements by their
/// original anchor line; modify replaces only the fields that are set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEdit {
    pub action: EditAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_anchor: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<LoggingStatement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_line: Option<u32>,
}

impl PlanEdit {
    pub fn add(statement: LoggingStatement) -> Self {
        Self {
            target_anchor: Some(statement.anchor_line),
            statement: Some(statement),
            ..Self::bare(EditAction::Add)
        }
    }

    pub fn remove(anchor: u32) -> Self {
        Self {
            target_anchor: Some(anchor),
            ..Self::bare(EditAction::Remove)
        }
    }

    pub fn modify(anchor: u32) -> Self {
        Self {
            target_anchor: Some(anchor),
            ..Self::bare(EditAction::Modify)
        }
    }

    fn bare(action: EditAction) -> Self {
        Self {
            action,
            target_anchor: None,
            statement: None,
            severity: None,
            template: None,
            variables: None,
            position: None,
            anchor_line: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum EditError {
    #[error("{action:?} names anchor {anchor} but no statement is anchored there")]
    TargetMissing { action: EditAction, anchor: u32 },
    #[error("{0:?} edit without a target anchor")]
    NoTarget(EditAction),
    #[error("add edit without a statement")]
    NoStatement,
    #[error("edit would produce an invalid statement: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOutcome {
    pub plan: LoggingPlan,
    pub applied: usize,
    pub skipped: Vec<EditError>,
}

/// Applies `edits` in order. Failing edits are skipped and reported; the
/// result has its revision bumped and is normalized.
pub fn apply_edits(plan: &LoggingPlan, edits: &[PlanEdit], line_count: usize) -> EditOutcome {
    let mut statements = plan.statements.clone();
    let mut applied = 0;
    let mut skipped = Vec::new();

    let check = |stmt: &LoggingStatement| -> Result<(), EditError> {
        stmt.validate().map_err(invalid)?;
        if stmt.anchor_line as usize > line_count {
            return Err(invalid(ModelError::AnchorOutOfRange {
                line: stmt.anchor_line,
                len: line_count,
            }));
        }
        Ok(())
    };

    for edit in edits {
        let result = match edit.action {
            EditAction::Add => match &edit.statement {
                None => Err(EditError::NoStatement),
                Some(stmt) => check(stmt).map(|_| statements.push(stmt.clone())),
            },
            EditAction::Remove => match edit.target_anchor {
                None => Err(EditError::NoTarget(EditAction::Remove)),
                Some(anchor) => {
                    let before = statements.len();
                    statements.retain(|s| s.anchor_line != anchor);
                    if statements.len() == before {
                        Err(EditError::TargetMissing {
                            action: EditAction::Remove,
                            anchor,
                        })
                    } else {
                        Ok(())
                    }
                }
            },
            EditAction::Modify => match edit.target_anchor {
                None => Err(EditError::NoTarget(EditAction::Modify)),
                Some(anchor) => modify_at(&mut statements, anchor, edit, &check),
            },
        };
        match result {
            Ok(()) => applied += 1,
            Err(e) => skipped.push(e),
        }
    }

    let next = LoggingPlan {
        plan_id: plan.plan_id.clone(),
        revision: plan.revision + 1,
        statements,
    };
    EditOutcome {
        plan: normalize_plan(&next),
        applied,
        skipped,
    }
}

fn modify_at(
    statements: &mut [LoggingStatement],
    anchor: u32,
    edit: &PlanEdit,
    check: &dyn Fn(&LoggingStatement) -> Result<(), EditError>,
) -> Result<(), EditError> {
    let targets: Vec<usize> = statements
        .iter()
        .enumerate()
        .filter(|(_, s)| s.anchor_line == anchor)
        .map(|(i, _)| i)
        .collect();
    if targets.is_empty() {
        return Err(EditError::TargetMissing {
            action: EditAction::Modify,
            anchor,
        });
    }
    let mut updated = Vec::with_capacity(targets.len());
    for &i in &targets {
        let mut s = statements[i].clone();
        if let Some(sev) = edit.severity {
            s.severity = sev;
        }
        if let Some(t) = &edit.template {
            s.template = t.clone();
        }
        if let Some(v) = &edit.variables {
            s.variables = v.clone();
        }
        if let Some(p) = edit.position {
            s.position = p;
        }
        if let Some(a) = edit.anchor_line {
            s.anchor_line = a;
        }
        check(&s)?;
        updated.push((i, s));
    }
    for (i, s) in updated {
        statements[i] = s;
    }
    Ok(())
}

fn invalid(e: ModelError) -> EditError {
    EditError::Invalid(alloc::string::ToString::to_string(&e))
}
