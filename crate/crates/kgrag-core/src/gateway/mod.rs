//! Chat-completion gateway.
//!
//! Everything that talks to a language model goes through [`ChatGateway`]:
//! graph construction, the deducibility judge, both answer generators, and
//! the MCQ harness. The trait is synchronous and shareable; the HTTP server
//! wraps calls in blocking tasks. [`ScriptedGateway`] supplies deterministic
//! responses for tests and offline runs, [`RemoteGateway`] speaks the
//! OpenAI-compatible chat-completions shape.

mod cache;
mod remote;
mod scripted;
pub mod templates;

pub use cache::CachingGateway;
pub use remote::{RemoteGateway, RemoteGatewayConfig};
pub use scripted::{ScriptRule, ScriptedGateway, TranscriptEntry, TranscriptRecorder};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("template `{template}` placeholder `{placeholder}` is unbound")]
    UnboundPlaceholder { template: TemplateName, placeholder: String },
    #[error("chat endpoint unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("no scripted response for template `{template}` (prompt starts: {prompt_head})")]
    Unscripted { template: String, prompt_head: String },
}

/// The named prompts this engine can render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Construct,
    DeducibleJudge,
    AnswerGraph,
    AnswerText,
    McqGenerate,
    McqAnswer,
}

impl TemplateName {
    pub const ALL: [TemplateName; 6] = [
        TemplateName::Construct,
        TemplateName::DeducibleJudge,
        TemplateName::AnswerGraph,
        TemplateName::AnswerText,
        TemplateName::McqGenerate,
        TemplateName::McqAnswer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateName::Construct => "construct",
            TemplateName::DeducibleJudge => "deducible_judge",
            TemplateName::AnswerGraph => "answer_graph",
            TemplateName::AnswerText => "answer_text",
            TemplateName::McqGenerate => "mcq_generate",
            TemplateName::McqAnswer => "mcq_answer",
        }
    }
}

impl std::fmt::Display for TemplateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

/// Decoding parameters forwarded to the provider. Deterministic decoding
/// (temperature 0) is the reproducibility baseline for judging and answering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 1024, seed: None }
    }
}

/// One completion result. `text` is meaningful when `finish_reason` signals a
/// normal stop; callers that care about truncation must inspect the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: String,
    pub usage_tokens: u64,
}

impl ChatResponse {
    pub fn stopped(text: impl Into<String>) -> Self {
        Self { text: text.into(), finish_reason: "stop".into(), usage_tokens: 0 }
    }

    pub fn is_truncated(&self) -> bool {
        self.finish_reason != "stop"
    }
}

/// A fully rendered prompt, plus the template/bindings it came from when it
/// was produced by [`PromptRequest::from_template`]. Scripted gateways key on
/// the structured form; remote gateways only need `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template: Option<TemplateName>,
    pub bindings: BTreeMap<String, String>,
    pub text: String,
    pub decoding: Decoding,
}

impl PromptRequest {
    pub fn from_template(
        template: TemplateName,
        bindings: BTreeMap<String, String>,
        decoding: Decoding,
    ) -> Result<Self, GatewayError> {
        let text = templates::render(template, &bindings)?;
        Ok(Self { template: Some(template), bindings, text, decoding })
    }

    pub fn raw(text: impl Into<String>, decoding: Decoding) -> Self {
        Self { template: None, bindings: BTreeMap::new(), text: text.into(), decoding }
    }
}

pub trait ChatGateway: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError>;
}

impl<G: ChatGateway + ?Sized> ChatGateway for &G {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: ChatGateway + ?Sized> ChatGateway for std::sync::Arc<G> {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }
}

/// Final answer pulled out of a generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedAnswer {
    pub text: String,
    /// True when no `Answer:` marker was found and the whole response was
    /// used instead.
    pub used_fallback: bool,
}

/// Takes the text after the last `Answer:` marker; chain-of-thought may
/// mention the marker mid-reasoning, so earlier occurrences are skipped.
pub fn extract_final_answer(response_text: &str) -> ExtractedAnswer {
    match response_text.rfind("Answer:") {
        Some(pos) => ExtractedAnswer {
            text: response_text[pos + "Answer:".len()..].trim().to_string(),
            used_fallback: false,
        },
        None => ExtractedAnswer { text: response_text.trim().to_string(), used_fallback: true },
    }
}
