//! OpenAI-compatible chat-completions client with bounded retries and a
//! configurable concurrent-request cap.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatGateway, ChatResponse, GatewayError, PromptRequest};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteGatewayConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// Upper bound on in-flight requests against this endpoint.
    pub concurrent_requests: usize,
}

impl Default for RemoteGatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "answer-model".into(),
            api_key: None,
            max_retries: 3,
            retry_backoff_ms: 250,
            concurrent_requests: 8,
        }
    }
}

/// Counting semaphore; the standard library has none and this needs ~20
/// lines.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(limit: usize) -> Self {
        Self { slots: Mutex::new(limit.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) {
        let mut slots = self.slots.lock().expect("gate lock");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("gate wait");
        }
        *slots -= 1;
    }

    fn release(&self) {
        *self.slots.lock().expect("gate lock") += 1;
        self.freed.notify_one();
    }
}

pub struct RemoteGateway {
    config: RemoteGatewayConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

#[derive(Serialize)]
struct ChatCompletionRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    total_tokens: u64,
}

impl RemoteGateway {
    pub fn new(config: RemoteGatewayConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .expect("http client builds");
        let gate = Gate::new(config.concurrent_requests);
        Self { config, client, gate }
    }

    fn send_once(&self, request: &PromptRequest) -> Result<ChatResponse, String> {
        let body = ChatCompletionRequest {
            model: &self.config.model,
            messages: vec![Message { role: "user", content: &request.text }],
            temperature: request.decoding.temperature,
            max_tokens: request.decoding.max_tokens,
            seed: request.decoding.seed,
        };
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("http {status}"));
        }
        let parsed: ChatCompletionResponse =
            resp.json().map_err(|e| format!("bad response body: {e}"))?;
        let choice = parsed.choices.into_iter().next().ok_or("response had no choices")?;
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".into()),
            usage_tokens: parsed.usage.map_or(0, |u| u.total_tokens),
        })
    }
}

impl ChatGateway for RemoteGateway {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError> {
        self.gate.acquire();
        let result = (|| {
            let attempts = self.config.max_retries.max(1);
            let mut last_err = String::new();
            for attempt in 0..attempts {
                if attempt > 0 {
                    std::thread::sleep(Duration::from_millis(
                        self.config.retry_backoff_ms << (attempt - 1),
                    ));
                }
                match self.send_once(request) {
                    Ok(response) => return Ok(response),
                    Err(message) => last_err = message,
                }
            }
            Err(GatewayError::Transport { attempts, message: last_err })
        })();
        self.gate.release();
        result
    }
}
