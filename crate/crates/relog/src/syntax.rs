//! Line-level heuristics over source text: method spans, assignments and
//! identifiers. Nothing here parses a language properly.

use regex::Regex;
use std::sync::LazyLock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpan {
    pub name: String,
    /// 1-based line of the signature.
    pub start: u32,
    /// 1-based line holding the closing brace.
    pub end: u32,
    /// Line holding the opening brace.
    pub body_open: u32,
}

impl MethodSpan {
    pub fn contains(&self, line: u32) -> bool {
        (self.start..=self.end).contains(&line)
    }
}

/// Brace delta of a line, skipping string/char literals and `//` comments.
fn brace_delta(line: &str) -> (i32, bool) {
    let mut depth = 0;
    let mut saw_open = false;
    let mut chars = line.chars().peekable();
    let mut in_str = false;
    while let Some(c) = chars.next() {
        if in_str {
            match c {
                '\\' => {
                    chars.next();
                }
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '\'' => {
                // char literal like '{' or '\''; lifetimes fall through harmlessly
                let rest: String = chars.clone().take(3).collect();
                if rest.starts_with('\\') && rest.chars().nth(2) == Some('\'') {
                    chars.nth(2);
                } else if rest.chars().nth(1) == Some('\'') {
                    chars.nth(1);
                }
            }
            '/' if chars.peek() == Some(&'/') => break,
            '{' => {
                depth += 1;
                saw_open = true;
            }
            '}' => depth -= 1,
            _ => {}
        }
    }
    (depth, saw_open)
}

/// All methods found by `method_re`, with bodies delimited by brace matching.
pub fn method_spans<S: AsRef<str>>(lines: &[S], method_re: &Regex) -> Vec<MethodSpan> {
    let mut spans = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let Some(caps) = method_re.captures(line.as_ref()) else { continue };
        let Some(name) = caps.name("name") else { continue };
        let mut depth = 0;
        let mut opened = None;
        for (j, l) in lines.iter().enumerate().skip(i) {
            let (d, saw_open) = brace_delta(l.as_ref());
            if opened.is_none() {
                if l.as_ref().trim_end().ends_with(';') && !saw_open {
                    break; // declaration without body
                }
                if saw_open {
                    opened = Some(j);
                }
            }
            depth += d;
            if opened.is_some() && depth <= 0 {
                spans.push(MethodSpan {
                    name: name.as_str().to_string(),
                    start: i as u32 + 1,
                    end: j as u32 + 1,
                    body_open: opened.unwrap_or(j) as u32 + 1,
                });
                break;
            }
        }
    }
    spans
}

/// Innermost method containing `line`.
pub fn enclosing_method<S: AsRef<str>>(lines: &[S], line: u32, method_re: &Regex) -> Option<MethodSpan> {
    method_spans(lines, method_re)
        .into_iter()
        .filter(|m| m.contains(line))
        .min_by_key(|m| m.end - m.start)
}

static LET_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*let\s+(?:mut\s+)?(?P<name>[A-Za-z_][A-Za-z0-9_]*)\b").unwrap());
static ASSIGN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*(?:[-+*/%|&^]|<<|>>)?=[^=]").unwrap()
});
static FOR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*for\s+&?(?:mut\s+)?(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s+in\b").unwrap());
static IDENT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").unwrap());
static PARAM_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[(,])\s*(?:mut\s+)?(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*:").unwrap());
static CALL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<path>(?:[A-Za-z_][A-Za-z0-9_]*::)*)(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap()
});

const KEYWORDS: &[&str] = &[
    "as", "break", "const", "continue", "crate", "else", "enum", "false", "fn", "for", "if", "impl", "in",
    "let", "loop", "match", "mod", "move", "mut", "pub", "ref", "return", "self", "Self", "static", "struct",
    "super", "trait", "true", "type", "unsafe", "use", "where", "while", "new", "null", "this",
];

/// Variable assigned by a simple statement line (`let x = ..;`, `x += ..;`).
pub fn assigned_variable(line: &str) -> Option<String> {
    let trimmed = line.trim_end();
    if !trimmed.ends_with(';') {
        return None;
    }
    LET_RE
        .captures(line)
        .or_else(|| ASSIGN_RE.captures(line))
        .map(|c| c["name"].to_string())
        .filter(|n| !KEYWORDS.contains(&n.as_str()))
}

/// Variable bound by a `let` or `for` on this line, whether or not it ends in `;`.
pub fn bound_variable(line: &str) -> Option<String> {
    LET_RE
        .captures(line)
        .or_else(|| FOR_RE.captures(line))
        .map(|c| c["name"].to_string())
        .filter(|n| n != "_")
}

/// Parameter names of a single-line signature.
pub fn parameters(signature: &str) -> Vec<String> {
    let Some(open) = signature.find('(') else { return Vec::new() };
    let close = signature.rfind(')').unwrap_or(signature.len());
    let inner = &signature[open..close.max(open)];
    PARAM_RE
        .captures_iter(inner)
        .map(|c| c["name"].to_string())
        .filter(|n| n != "self" && n != "_")
        .collect()
}

/// Identifiers on a line, in order of first appearance, keywords excluded.
pub fn identifiers(line: &str) -> Vec<String> {
    let code = strip_strings(line);
    let mut out: Vec<String> = Vec::new();
    for m in IDENT_RE.find_iter(&code) {
        let s = m.as_str();
        let before = code[..m.start()].chars().last();
        if matches!(before, Some('.') | Some(':')) || KEYWORDS.contains(&s) {
            continue;
        }
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

fn strip_strings(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_str = false;
    let mut esc = false;
    for c in line.chars() {
        if in_str {
            if esc {
                esc = false;
            } else if c == '\\' {
                esc = true;
            } else if c == '"' {
                in_str = false;
                out.push('"');
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == '/' && out.ends_with('/') {
            out.pop();
            break;
        }
        out.push(c);
    }
    out
}

/// First function call on a line as (module path, name), e.g. `unit::sum_to(`.
pub fn first_call(line: &str) -> Option<(String, String)> {
    CALL_RE
        .captures_iter(&strip_strings(line))
        .map(|c| (c["path"].trim_end_matches("::").to_string(), c["name"].to_string()))
        .find(|(_, name)| !KEYWORDS.contains(&name.as_str()) && !name.ends_with('!'))
}

/// Is `line` a simple `return <ident>;` or a bare tail identifier?
pub fn returned_identifier(line: &str) -> Option<String> {
    let t = line.trim();
    let body = t.strip_prefix("return ").map(|b| b.trim_end_matches(';').trim()).unwrap_or(t);
    let simple = !body.is_empty()
        && body.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && body.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    (simple && !KEYWORDS.contains(&body)).then(|| body.to_string())
}

/// Source rendered with right-aligned line numbers, as shown to models.
pub fn numbered<S: AsRef<str>>(lines: &[S]) -> String {
    let width = lines.len().to_string().len().max(3);
    let mut out = String::new();
    for (i, l) in lines.iter().enumerate() {
        out.push_str(&format!("{:>width$} | {}\n", i + 1, l.as_ref()));
    }
    out
}

/// Inverse of [`numbered`].
pub fn unnumbered(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| match l.split_once(" | ") {
            Some((n, rest)) if n.trim().parse::<u32>().is_ok() => rest.to_string(),
            _ => match l.trim_end().split_once(" |") {
                Some((n, "")) if n.trim().parse::<u32>().is_ok() => String::new(),
                _ => l.to_string(),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rust_fn() -> Regex {
        Regex::new(&relog_core::RenderProfile::rust().method_pattern).unwrap()
    }

    const SRC: &[&str] = &[
        "pub fn a(x: u32) -> u32 {",
        "    let s = \"}\";",
        "    x",
        "}",
        "",
        "fn b() {",
        "    if true {",
        "        let c = '{';",
        "    }",
        "}",
    ];

    #[test]
    fn spans_match_braces() {
        let spans = method_spans(SRC, &rust_fn());
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].name.as_str(), spans[0].start, spans[0].end), ("a", 1, 4));
        assert_eq!((spans[1].name.as_str(), spans[1].start, spans[1].end), ("b", 6, 10));
        assert_eq!(enclosing_method(SRC, 8, &rust_fn()).unwrap().name, "b");
        assert!(enclosing_method(SRC, 5, &rust_fn()).is_none());
    }

    #[test]
    fn assignments_and_bindings() {
        assert_eq!(assigned_variable("    let mut acc: u32 = 0;").as_deref(), Some("acc"));
        assert_eq!(assigned_variable("        acc += i;").as_deref(), Some("acc"));
        assert_eq!(assigned_variable("    if a == b {"), None);
        assert_eq!(assigned_variable("    foo(x);"), None);
        assert_eq!(assigned_variable("    return x;"), None);
        assert_eq!(bound_variable("    for &x in xs {").as_deref(), Some("x"));
    }

    #[test]
    fn params_idents_calls() {
        assert_eq!(parameters("pub fn f(table: &[i32], mut idx: usize) -> i32 {"), vec!["table", "idx"]);
        assert_eq!(identifiers("    total += *x; // acc"), vec!["total", "x"]);
        assert_eq!(identifiers("    let v = s.len();"), vec!["v", "s"]);
        assert_eq!(
            first_call("    let total = unit::sum_to(n);"),
            Some(("unit".to_string(), "sum_to".to_string()))
        );
        assert_eq!(returned_identifier("    return count;").as_deref(), Some("count"));
        assert_eq!(returned_identifier("    best").as_deref(), Some("best"));
        assert_eq!(returned_identifier("    u64::from(acc)"), None);
    }

    #[test]
    fn numbering_round_trips() {
        let lines = vec!["a".to_string(), String::new(), "  b | c".to_string()];
        assert_eq!(unnumbered(&numbered(&lines)), lines);
    }
}
