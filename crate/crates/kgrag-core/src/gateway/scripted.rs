//! Deterministic scripted gateway for tests and offline pipelines.
//!
//! Responses resolve in a fixed order: exact binding-fingerprint scripts,
//! then substring rules (first match wins), then per-template defaults. Every
//! call is appended to a transcript for replay and assertions.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatGateway, ChatResponse, GatewayError, PromptRequest, TemplateName};

/// One recorded gateway call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub template: Option<TemplateName>,
    pub bindings: BTreeMap<String, String>,
    pub prompt_text: String,
    pub response_text: String,
}

/// Substring-matching script. `template` of `None` matches raw prompts. Each
/// requirement names a binding key (or `_prompt` for the rendered text) and a
/// substring it must contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub template: Option<TemplateName>,
    #[serde(default)]
    pub require_contains: Vec<(String, String)>,
    pub response: String,
}

impl ScriptRule {
    fn matches(&self, request: &PromptRequest) -> bool {
        if self.template != request.template {
            return false;
        }
        self.require_contains.iter().all(|(key, needle)| {
            if key == "_prompt" {
                request.text.contains(needle)
            } else {
                request.bindings.get(key).is_some_and(|v| v.contains(needle))
            }
        })
    }
}

fn binding_fingerprint(bindings: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in bindings {
        hasher.update((k.len() as u64).to_le_bytes());
        hasher.update(k.as_bytes());
        hasher.update((v.len() as u64).to_le_bytes());
        hasher.update(v.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Default)]
pub struct ScriptedGateway {
    exact: HashMap<(Option<TemplateName>, String), String>,
    rules: Vec<ScriptRule>,
    defaults: HashMap<Option<TemplateName>, String>,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl ScriptedGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scripts a response for one exact binding set of a template.
    pub fn script_exact(
        mut self,
        template: TemplateName,
        bindings: &[(&str, &str)],
        response: impl Into<String>,
    ) -> Self {
        let bindings: BTreeMap<String, String> =
            bindings.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self.exact
            .insert((Some(template), binding_fingerprint(&bindings)), response.into());
        self
    }

    /// Scripts a response for any call of `template` whose binding `key`
    /// contains `needle`.
    pub fn respond_when(
        self,
        template: TemplateName,
        key: &str,
        needle: &str,
        response: impl Into<String>,
    ) -> Self {
        self.with_rule(ScriptRule {
            template: Some(template),
            require_contains: vec![(key.to_string(), needle.to_string())],
            response: response.into(),
        })
    }

    pub fn with_rule(mut self, rule: ScriptRule) -> Self {
        self.rules.push(rule);
        self
    }

    /// Fallback response for every call of `template`.
    pub fn script_default(mut self, template: TemplateName, response: impl Into<String>) -> Self {
        self.defaults.insert(Some(template), response.into());
        self
    }

    /// Fallback response for raw (template-less) prompts.
    pub fn script_raw_default(mut self, response: impl Into<String>) -> Self {
        self.defaults.insert(None, response.into());
        self
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    pub fn take_transcript(&self) -> Vec<TranscriptEntry> {
        std::mem::take(&mut self.transcript.lock().expect("transcript lock"))
    }

    pub fn call_count(&self) -> usize {
        self.transcript.lock().expect("transcript lock").len()
    }

    fn resolve(&self, request: &PromptRequest) -> Option<String> {
        if request.template.is_some() {
            let key = (request.template, binding_fingerprint(&request.bindings));
            if let Some(hit) = self.exact.get(&key) {
                return Some(hit.clone());
            }
        }
        if let Some(rule) = self.rules.iter().find(|r| r.matches(request)) {
            return Some(rule.response.clone());
        }
        self.defaults.get(&request.template).cloned()
    }
}

impl ChatGateway for ScriptedGateway {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.resolve(request).ok_or_else(|| GatewayError::Unscripted {
            template: request
                .template
                .map_or_else(|| "raw".to_string(), |t| t.as_str().to_string()),
            prompt_head: request.text.chars().take(80).collect(),
        })?;
        self.transcript.lock().expect("transcript lock").push(TranscriptEntry {
            template: request.template,
            bindings: request.bindings.clone(),
            prompt_text: request.text.clone(),
            response_text: response.clone(),
        });
        Ok(ChatResponse::stopped(response))
    }
}

/// Per-call-site transcript capture over any shared gateway. Each scoring
/// request wraps the process-wide gateway in its own recorder so concurrent
/// requests never interleave transcripts.
pub struct TranscriptRecorder<G> {
    inner: G,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<G: ChatGateway> TranscriptRecorder<G> {
    pub fn new(inner: G) -> Self {
        Self { inner, entries: Mutex::new(Vec::new()) }
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("recorder lock").clone()
    }
}

impl<G: ChatGateway> ChatGateway for TranscriptRecorder<G> {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        self.entries.lock().expect("recorder lock").push(TranscriptEntry {
            template: request.template,
            bindings: request.bindings.clone(),
            prompt_text: request.text.clone(),
            response_text: response.text.clone(),
        });
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Decoding;

    fn judge_request(answer: &str) -> PromptRequest {
        let bindings: BTreeMap<String, String> = [
            ("triples string".to_string(), "(a, r, b)".to_string()),
            ("query".to_string(), "who?".to_string()),
            ("answer".to_string(), answer.to_string()),
        ]
        .into();
        PromptRequest::from_template(TemplateName::DeducibleJudge, bindings, Decoding::default())
            .unwrap()
    }

    #[test]
    fn resolution_order_is_exact_then_rule_then_default() {
        let gateway = ScriptedGateway::new()
            .script_exact(
                TemplateName::DeducibleJudge,
                &[("triples string", "(a, r, b)"), ("query", "who?"), ("answer", "b")],
                "No",
            )
            .respond_when(TemplateName::DeducibleJudge, "answer", "c", "Yes")
            .script_default(TemplateName::DeducibleJudge, "maybe");
        assert_eq!(gateway.complete(&judge_request("b")).unwrap().text, "No");
        assert_eq!(gateway.complete(&judge_request("c")).unwrap().text, "Yes");
        assert_eq!(gateway.complete(&judge_request("zz")).unwrap().text, "maybe");
        assert_eq!(gateway.call_count(), 3);
    }

    #[test]
    fn unscripted_calls_error() {
        let gateway = ScriptedGateway::new();
        assert!(matches!(
            gateway.complete(&judge_request("b")),
            Err(GatewayError::Unscripted { .. })
        ));
    }

    #[test]
    fn recorder_keeps_its_own_entries() {
        let gateway = ScriptedGateway::new().script_default(TemplateName::DeducibleJudge, "Yes");
        let recorder = TranscriptRecorder::new(&gateway);
        recorder.complete(&judge_request("b")).unwrap();
        assert_eq!(recorder.entries().len(), 1);
        assert_eq!(recorder.entries()[0].response_text, "Yes");
        assert_eq!(gateway.call_count(), 1);
    }

    #[test]
    fn raw_prompts_use_raw_default() {
        let gateway = ScriptedGateway::new().script_raw_default("[\"Entity\"]");
        let req = PromptRequest::raw("Extract entities from: q", Decoding::default());
        assert_eq!(gateway.complete(&req).unwrap().text, "[\"Entity\"]");
    }
}
