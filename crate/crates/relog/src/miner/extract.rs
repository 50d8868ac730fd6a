//! Finding logging calls in source text.

use regex::Regex;

/// A logging call found in one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundCall {
    pub line: u32,
    pub api_name: String,
    /// The call text from the API name to its closing parenthesis.
    pub text: String,
}

/// Default API patterns: `log`/`logger`/`LOG` receivers in Java-like code
/// and the `log` crate macros in Rust. Each must match up to and including
/// the opening parenthesis.
pub fn default_patterns() -> Vec<String> {
    vec![
        r"\b(?:log|logger|LOG|LOGGER|Log|Logger)\.(?:trace|debug|info|warn|warning|error|fatal)\s*\(".into(),
        r"\b(?:log::)?(?:trace|debug|info|warn|error)!\s*\(".into(),
    ]
}

/// Byte offset just past the parenthesis that closes the one ending at
/// `open`, skipping string and char literals. `None` when unbalanced.
fn close_paren(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = open;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'\'' => {
                // A char literal is at most a few bytes; lifetimes have no
                // closing quote nearby and are skipped as one byte.
                if let Some(end) = text[i + 1..].char_indices().take(4).find(|(_, c)| *c == '\'').map(|(k, _)| k) {
                    i += end + 1;
                }
            }
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Every call matched by `patterns`, in order of position. Overlapping
/// matches from different patterns are reported once.
pub fn find_calls(text: &str, patterns: &[Regex]) -> Vec<FoundCall> {
    let mut starts: Vec<(usize, usize)> = Vec::new();
    for re in patterns {
        for m in re.find_iter(text) {
            starts.push((m.start(), m.end()));
        }
    }
    starts.sort_unstable();
    starts.dedup_by(|b, a| b.0 < a.1);
    let mut out = Vec::new();
    for (start, end) in starts {
        let open = end - 1;
        let Some(close) = close_paren(text, open) else { continue };
        let api_name = text[start..open].trim_end().to_string();
        let line = text[..start].matches('\n').count() as u32 + 1;
        out.push(FoundCall { line, api_name, text: text[start..close].to_string() });
    }
    out
}
