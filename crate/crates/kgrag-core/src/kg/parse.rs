//! Parsing constructor-model output into triples.
//!
//! Constructor models are told to emit nothing but a JSON array, yet real
//! output arrives wrapped in code fences, prose, or both. The parser scans
//! for the first position where a JSON array parses and ignores everything
//! around it; anything else in the output is model noise.

use serde_json::Value;

use super::{KgError, Triple};

/// Result of parsing one raw constructor output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTriples {
    pub triples: Vec<Triple>,
    /// Array elements dropped for missing keys, empty values, or a
    /// non-object shape.
    pub malformed: usize,
}

/// Trims, collapses internal whitespace runs, and case-folds a label.
pub fn normalize_entity(label: &str) -> Result<String, KgError> {
    let collapsed = label.split_whitespace().collect::<Vec<_>>().join(" ");
    let normalized = collapsed.to_lowercase();
    if normalized.is_empty() {
        return Err(KgError::EmptyEntity);
    }
    Ok(normalized)
}

/// Returns the elements of the first JSON array found anywhere in `text`.
///
/// Code fences and surrounding prose are skipped by construction: parsing is
/// attempted at each `[` until a JSON value succeeds. Also used for MCQ
/// output, which shares the array-of-objects shape.
pub fn parse_json_array(text: &str) -> Option<Vec<Value>> {
    for (pos, _) in text.char_indices().filter(|&(_, c)| c == '[') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            return Some(items);
        }
    }
    None
}

/// Parses raw constructor output into well-formed triples.
///
/// Elements missing one of the three keys, or whose values trim to empty,
/// are counted as malformed and dropped. A bare `[]` is a valid empty
/// extraction; output with no JSON array at all is a parse error.
pub fn parse_triples(raw_output: &str) -> Result<ParsedTriples, KgError> {
    let items = parse_json_array(raw_output).ok_or(KgError::NoJsonArray)?;
    let mut triples = Vec::new();
    let mut malformed = 0usize;
    for item in items {
        match triple_from_value(&item) {
            Some(t) => triples.push(t),
            None => malformed += 1,
        }
    }
    Ok(ParsedTriples { triples, malformed })
}

fn triple_from_value(value: &Value) -> Option<Triple> {
    let obj = value.as_object()?;
    let field = |key: &str| -> Option<String> {
        match obj.get(key)? {
            Value::String(s) => Some(s.clone()),
            // Models frequently leave numbers and booleans unquoted.
            Value::Number(n) => Some(n.to_string()),
            Value::Bool(b) => Some(b.to_string()),
            _ => None,
        }
    };
    Triple::new(field("subject")?, field("relation")?, field("object")?).ok()
}
