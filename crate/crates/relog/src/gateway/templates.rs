//! Prompt templates: plain text with `{{slot}}` placeholders, versioned by
//! the hash of their content.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use relog_core::digest::sha256_hex;

use super::GatewayError;

pub const GENERATION: &str = "generation";
pub const REPAIR: &str = "repair";
pub const CRITIC: &str = "critic";
pub const REFINEMENT: &str = "refinement";
pub const DEBUG_DIRECT: &str = "debug_direct";
pub const DEBUG_INDIRECT: &str = "debug_indirect";

static SLOT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub text: String,
    /// First 16 hex digits of the SHA-256 of `text`.
    pub version: String,
}

impl PromptTemplate {
    pub fn new(id: &str, text: &str) -> Self {
        Self { id: id.to_string(), text: text.to_string(), version: sha256_hex(text.as_bytes())[..16].to_string() }
    }

    /// Slot names in order of first use.
    pub fn slots(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in SLOT_RE.captures_iter(&self.text) {
            if !out.iter().any(|s| s == &c[1]) {
                out.push(c[1].to_string());
            }
        }
        out
    }

    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        for name in self.slots() {
            if !slots.contains_key(&name) {
                return Err(GatewayError::MissingSlot { template: self.id.clone(), slot: name });
            }
        }
        Ok(SLOT_RE.replace_all(&self.text, |c: &regex::Captures<'_>| slots[&c[1]].clone()).into_owned())
    }
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let mut set = Self { templates: BTreeMap::new() };
        for (id, text) in [
            (GENERATION, include_str!("../../templates/generation.txt")),
            (REPAIR, include_str!("../../templates/repair.txt")),
            (CRITIC, include_str!("../../templates/critic.txt")),
            (REFINEMENT, include_str!("../../templates/refinement.txt")),
            (DEBUG_DIRECT, include_str!("../../templates/debug_direct.txt")),
            (DEBUG_INDIRECT, include_str!("../../templates/debug_indirect.txt")),
        ] {
            set.insert(PromptTemplate::new(id, text));
        }
        set
    }

    /// Replaces built-ins with `<id>.txt` files found in `dir`.
    pub fn with_overrides(mut self, dir: &std::path::Path) -> std::io::Result<Self> {
        let ids: Vec<String> = self.templates.keys().cloned().collect();
        for id in ids {
            let path = dir.join(format!("{id}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path)?;
                self.insert(PromptTemplate::new(&id, &text));
            }
        }
        Ok(self)
    }

    pub fn insert(&mut self, t: PromptTemplate) {
        self.templates.insert(t.id.clone(), t);
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, GatewayError> {
        self.templates.get(id).ok_or_else(|| GatewayError::UnknownTemplate(id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_slots() {
        let set = TemplateSet::builtin();
        assert_eq!(set.get(REPAIR).unwrap().slots(), vec!["unit_path", "code", "plan", "diagnostics"]);
        assert_eq!(
            set.get(DEBUG_INDIRECT).unwrap().slots(),
            vec!["instrumented_path", "callers", "plan", "logs", "outcome"]
        );
    }

    #[test]
    fn missing_slot_is_reported() {
        let t = PromptTemplate::new("t", "a {{x}} b {{y}}");
        let mut slots = BTreeMap::new();
        slots.insert("x".to_string(), "1".to_string());
        assert!(matches!(t.render(&slots), Err(GatewayError::MissingSlot { slot, .. }) if slot == "y"));
        slots.insert("y".to_string(), "{{x}}".to_string());
        assert_eq!(t.render(&slots).unwrap(), "a 1 b {{x}}");
    }
}
