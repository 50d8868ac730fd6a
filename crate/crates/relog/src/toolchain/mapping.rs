//! Maps tool-reported file positions back to original source coordinates.

use std::path::Path;

use relog_core::{InstrumentedUnit, RenderProfile};

/// Where a reported position lands in the original program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mapped {
    /// Original line. For a marker line this is the statement's anchor.
    pub line: Option<u32>,
    /// Plan statement index when the position is on a marker line.
    pub statement: Option<usize>,
}

pub struct LineMapper<'a> {
    pub workspace: &'a Path,
    pub instrumented: Option<&'a InstrumentedUnit>,
    pub render: &'a RenderProfile,
}

/// Strips `./` and a workspace prefix so paths compare as workspace-relative.
pub fn relative_path(workspace: &Path, reported: &str) -> String {
    let p = Path::new(reported);
    let p = p.strip_prefix(workspace).unwrap_or(p);
    let s = p.to_string_lossy();
    s.trim_start_matches("./").to_string()
}

impl LineMapper<'_> {
    pub fn normalize(&self, reported: &str) -> String {
        relative_path(self.workspace, reported)
    }

    pub fn map(&self, file: &str, rendered_line: u32) -> Mapped {
        let file = self.normalize(file);
        match self.instrumented {
            Some(instr) if instr.base_path == file => {
                if let Some(orig) = instr.original_line_of(rendered_line) {
                    return Mapped { line: Some(orig), statement: None };
                }
                let text = instr
                    .rendered_lines
                    .get((rendered_line as usize).wrapping_sub(1))
                    .map(String::as_str)
                    .unwrap_or("");
                match self.render.parse_marker(text) {
                    Some(m) => Mapped { line: Some(m.anchor_line), statement: Some(m.index) },
                    None => Mapped { line: None, statement: None },
                }
            }
            _ => Mapped { line: Some(rendered_line), statement: None },
        }
    }
}
