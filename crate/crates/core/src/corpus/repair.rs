//! Cleanup of raw model output before JSON parsing.
//!
//! Three passes, in order: Markdown fences are stripped, the text is cut down
//! to the first object (first `{` up to its depth-matched `}`), and commas
//! that directly precede `}` or `]` are dropped. String literals are honored
//! by the last two passes. Validity of the result is not checked here.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("no opening brace in model output")]
    NoJsonObject,
}

fn fence_pattern() -> &'static Regex {
    static FENCE: OnceLock<Regex> = OnceLock::new();
    FENCE.get_or_init(|| Regex::new(r"```[A-Za-z0-9_+-]*").expect("valid fence pattern"))
}

pub fn repair_json_text(raw: &str) -> Result<String, RepairError> {
    let unfenced = strip_fences(raw);
    let object = extract_object(&unfenced).ok_or(RepairError::NoJsonObject)?;
    Ok(remove_trailing_commas(object))
}

fn strip_fences(raw: &str) -> String {
    let mut text = raw.to_string();
    while text.contains("```") {
        text = fence_pattern().replace_all(&text, "").into_owned();
    }
    text
}

/// First `{` through its matching `}`. An object that never closes runs to
/// the end of the text.
fn extract_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, ch) in text[start..].char_indices() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    Some(&text[start..])
}

fn remove_trailing_commas(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for ch in text.chars() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            out.push(ch);
            continue;
        }
        match ch {
            '"' => in_string = true,
            '}' | ']' => {
                // Drop every comma in the whitespace/comma run before the
                // closer; whitespace is kept.
                let tail_start = out
                    .trim_end_matches(|c: char| c == ',' || c.is_whitespace())
                    .len();
                if out[tail_start..].contains(',') {
                    let tail: String = out[tail_start..].chars().filter(|c| *c != ',').collect();
                    out.truncate(tail_start);
                    out.push_str(&tail);
                }
            }
            _ => {}
        }
        out.push(ch);
    }
    out
}
