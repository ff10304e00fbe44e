//! The prompt templates used across construction, judging, answering, and
//! the MCQ quality harness. Template text is frozen; golden-file tests in
//! `tests/` guard every byte. Placeholders are written `{name}` and may
//! contain spaces.

use std::collections::BTreeMap;

use super::{GatewayError, TemplateName};

pub const CONSTRUCT: &str = r#"You are an expert knowledge graph constructor.
Your task is to extract factual information from the provided text and represent it strictly as a JSON array of knowledge graph triples.

Output Format

- The output must be a **JSON array**.

- Each element in the array must be a **JSON object** with exactly three non-empty keys:

  - "subject": the main entity, concept, event, or attribute.

  - "relation": a concise, descriptive phrase or verb that describes the relationship (e.g., "founded by", "started on", "is a", "has circulation of").

  - "object": the entity, concept, value, event, or attribute that the subject has a relationship with.

Constraints

- **Do not include any text other than the JSON output.**

- Do not add explanations, comments, or formatting outside of the JSON array.

- Extract **all possible and relevant triples**.

- All keys must exist and all values must be non-empty strings.

- The "subject" and "object" can be specific entities (e.g., "Radio City", "Football in Albania", "Echosmith") or specific values (e.g., "3 July 2001", "1,310,696").

- If no triples can be extracted, return exactly: `[]`.

Extracts for:
{passage}"#;

pub const DEDUCIBLE_JUDGE: &str = r#"As an advanced reading comprehension assistant, your task is to evaluate whether the provided knowledge graph (KG) context contains sufficient information to deduce the given true answer to the question.
Analyze the KG context carefully and determine if it fully supports the true answer without requiring external knowledge. Respond with only 'Yes' or 'No', indicating whether the true answer can be deduced from the KG context.

Knowledge graph (KG) context:{triples string}

Question:{query}

True Answer:{answer}

Can the true answer be deduced from the KG context? Answer 'Yes' or 'No' only."#;

pub const ANSWER_GRAPH: &str = r#"As an advanced reading comprehension assistant, your task is to analyze extracted information and corresponding questions meticulously. If the knowledge graph information is not enough, you can use your own knowledge to answer the question.
Your response start after "Thought: ", where you will methodically break down the reasoning process, illustrating how you arrive at conclusions.
Conclude with "Answer: " to present a concise, definitive response as a noun phrase, no elaborations.

{triples string}

{question}

Thought:"#;

pub const ANSWER_TEXT: &str = r#"As an advanced reading comprehension assistant, your task is to analyze text passages and corresponding questions meticulously. If the information is not enough, you can use your own knowledge to answer the question.
Your response start after "Thought: ", where you will methodically break down the reasoning process, illustrating how you arrive at conclusions.
Conclude with "Answer: " to present a concise, definitive response as a noun phrase, no elaborations.

{Retrieved Texts}

{question}

Thought:"#;

pub const MCQ_GENERATE: &str = r#"You are an expert in generating multiple-choice questions (MCQs) from scientific texts.
Your task is to generate 5 multiple-choice questions based on the following passage.

Each question should:

- Focus on factual claims, numerical data, definitions, or relational knowledge from the passage.

- Have 4 options (one correct answer and three plausible distractors).

- Clearly indicate the correct answer.

The output should be in JSON format, with each question as a dictionary containing:

- "question": The MCQ question.

- "options": A list of 4 options (e.g., ["A: ..", "B: ..", "C: ..", "D: .."]).

- "answer": The correct answer (e.g., "A").

Passage:
{passage}"#;

pub const MCQ_ANSWER: &str = r#"Given the contexts or evidences:
{contexts}

Here is a multiple-choice question:

Question: {question}

Options:
A. {options_0}
B. {options_1}
C. {options_2}
D. {options_3}

Please select the correct answer by choosing A, B, C, or D. Respond with only the letter of your choice."#;

pub fn template_text(name: TemplateName) -> &'static str {
    match name {
        TemplateName::Construct => CONSTRUCT,
        TemplateName::DeducibleJudge => DEDUCIBLE_JUDGE,
        TemplateName::AnswerGraph => ANSWER_GRAPH,
        TemplateName::AnswerText => ANSWER_TEXT,
        TemplateName::McqGenerate => MCQ_GENERATE,
        TemplateName::McqAnswer => MCQ_ANSWER,
    }
}

/// Placeholder names appearing in a template, in first-occurrence order.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let tail = &rest[open + 1..];
        let Some(close) = tail.find('}') else { break };
        let name = &tail[..close];
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
        }
        rest = &tail[close + 1..];
    }
    names
}

/// Substitutes every placeholder in a single pass. Binding values are copied
/// verbatim, so braces inside them are never re-interpreted.
pub fn render(
    name: TemplateName,
    bindings: &BTreeMap<String, String>,
) -> Result<String, GatewayError> {
    let template = template_text(name);
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let close = tail.find('}').expect("templates close every placeholder");
        let key = &tail[..close];
        let value = bindings.get(key).ok_or_else(|| GatewayError::UnboundPlaceholder {
            template: name,
            placeholder: key.to_string(),
        })?;
        out.push_str(value);
        rest = &tail[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn construct_renders_passage_after_extracts_for() {
        let rendered = render(TemplateName::Construct, &b(&[("passage", "X")])).unwrap();
        assert!(rendered.contains("Extracts for:\nX"));
        assert!(rendered.ends_with("Extracts for:\nX"));
    }

    #[test]
    fn unbound_placeholder_is_an_error() {
        let err = render(
            TemplateName::DeducibleJudge,
            &b(&[("triples string", "(a, r, b)"), ("query", "q")]),
        );
        assert!(matches!(
            err,
            Err(GatewayError::UnboundPlaceholder { placeholder, .. }) if placeholder == "answer"
        ));
    }

    #[test]
    fn braces_in_binding_values_pass_through() {
        let rendered = render(
            TemplateName::Construct,
            &b(&[("passage", r#"JSON like {"a": [1]} stays intact"#)]),
        )
        .unwrap();
        assert!(rendered.contains(r#"{"a": [1]}"#));
    }

    #[test]
    fn expected_placeholders_per_template() {
        assert_eq!(placeholders(CONSTRUCT), vec!["passage"]);
        assert_eq!(placeholders(DEDUCIBLE_JUDGE), vec!["triples string", "query", "answer"]);
        assert_eq!(placeholders(ANSWER_GRAPH), vec!["triples string", "question"]);
        assert_eq!(placeholders(ANSWER_TEXT), vec!["Retrieved Texts", "question"]);
        assert_eq!(placeholders(MCQ_GENERATE), vec!["passage"]);
        assert_eq!(
            placeholders(MCQ_ANSWER),
            vec!["contexts", "question", "options_0", "options_1", "options_2", "options_3"]
        );
    }
}
