//! Response schemas. Validation is typed deserialization plus the domain
//! checks that serde cannot express.

use relog_core::patch::Patch;
use relog_core::verdict::MAX_SCORE;
use relog_core::{CriticVerdict, LoggingPlan, PlanEdit};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    /// Generation and repair answers.
    LoggingPlan,
    CriticVerdict,
    EditList,
    DebugVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditList {
    pub edits: Vec<PlanEdit>,
}

/// Where a debugging agent says the defect is.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugVerdict {
    pub defect_reported: bool,
    #[serde(default)]
    pub location: Option<Location>,
    #[serde(default)]
    pub explanation: String,
    #[serde(default)]
    pub patch: Option<Patch>,
}

impl DebugVerdict {
    pub fn not_detected(explanation: impl Into<String>) -> Self {
        Self { defect_reported: false, location: None, explanation: explanation.into(), patch: None }
    }
}

impl Schema {
    pub fn validate(self, value: &Value) -> Result<(), String> {
        fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, String> {
            T::deserialize(v).map_err(|e| e.to_string())
        }
        match self {
            Schema::LoggingPlan => {
                let plan: LoggingPlan = parse(value)?;
                plan.validate(None).map_err(|e| e.to_string())
            }
            Schema::CriticVerdict => {
                let v: CriticVerdict = parse(value)?;
                let scores = [v.traceability, v.state_visibility, v.causal_linkage];
                if scores.iter().chain(v.extra.values()).any(|s| *s > MAX_SCORE) {
                    return Err(format!("scores must be within 0..={MAX_SCORE}"));
                }
                Ok(())
            }
            Schema::EditList => parse::<EditList>(value).map(|_| ()),
            Schema::DebugVerdict => {
                let v: DebugVerdict = parse(value)?;
                if v.patch.is_some() && !v.defect_reported {
                    return Err("a patch requires defect_reported".into());
                }
                Ok(())
            }
        }
    }
}

/// Pulls a JSON object out of model text: the whole text, a fenced block,
/// or the span from the first `{` to the last `}`.
pub fn extract_json(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return v.is_object().then_some(v);
    }
    if let Some(start) = trimmed.find("```") {
        let after = &trimmed[start + 3..];
        let after = after.strip_prefix("json").unwrap_or(after);
        if let Some(end) = after.find("```") {
            if let Ok(v) = serde_json::from_str::<Value>(after[..end].trim()) {
                if v.is_object() {
                    return Some(v);
                }
            }
        }
    }
    let (s, e) = (trimmed.find('{')?, trimmed.rfind('}')?);
    if e <= s {
        return None;
    }
    serde_json::from_str::<Value>(&trimmed[s..=e]).ok().filter(Value::is_object)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn extracts_from_prose_and_fences() {
        assert!(extract_json("no json here").is_none());
        assert_eq!(extract_json("Sure:\n```json\n{\"a\": 1}\n```\nDone").unwrap(), json!({"a": 1}));
        assert_eq!(extract_json("x {\"a\": {\"b\": 2}} y").unwrap(), json!({"a": {"b": 2}}));
        assert!(extract_json("[1, 2]").is_none());
    }

    #[test]
    fn plan_schema_checks_slots() {
        let good = json!({"plan_id": "p", "revision": 0, "statements": [
            {"anchor_line": 1, "position": "before", "severity": "info", "template": "x={}", "variables": ["x"]}]});
        assert!(Schema::LoggingPlan.validate(&good).is_ok());
        let bad = json!({"plan_id": "p", "revision": 0, "statements": [
            {"anchor_line": 1, "severity": "info", "template": "x={} {}", "variables": ["x"]}]});
        assert!(Schema::LoggingPlan.validate(&bad).is_err());
    }

    #[test]
    fn verdict_scores_are_bounded() {
        let v = json!({"traceability": 3, "state_visibility": 0, "causal_linkage": 0, "sufficient": false});
        assert!(Schema::CriticVerdict.validate(&v).is_err());
    }

    #[test]
    fn debug_patch_requires_report() {
        let v = json!({"defect_reported": false, "patch": {"hunks": []}});
        assert!(Schema::DebugVerdict.validate(&v).is_err());
        let v = json!({"defect_reported": true, "location": {"method": "f"}});
        assert!(Schema::DebugVerdict.validate(&v).is_ok());
    }
}
