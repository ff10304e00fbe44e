//! Run configuration.
//!
//! One `RunConfig` drives every surface: graph builds, evaluation runs,
//! offline scoring, and the HTTP service. Providers are declared here
//! (scripted or remote) so whole pipelines can run hermetically from a
//! config file. Endpoint, model, and token fields can be overridden through
//! environment variables; flags override both.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::{
    CachedEmbedder, EmbeddingProvider, HashEmbedder, RemoteEmbedder, RemoteEmbedderConfig,
};
use crate::gateway::{
    CachingGateway, ChatGateway, Decoding, RemoteGateway, RemoteGatewayConfig, ScriptRule,
    ScriptedGateway, TemplateName,
};
use crate::grpo::GrpoConfig;
use crate::ppr::PprConfig;
use crate::retrieve::RetrieverSpec;
use crate::reward::RewardConfig;

pub const ENV_GATEWAY_ENDPOINT: &str = "KGRAG_GATEWAY_ENDPOINT";
pub const ENV_GATEWAY_MODEL: &str = "KGRAG_GATEWAY_MODEL";
pub const ENV_GATEWAY_API_KEY: &str = "KGRAG_GATEWAY_API_KEY";
pub const ENV_EMBED_ENDPOINT: &str = "KGRAG_EMBED_ENDPOINT";
pub const ENV_EMBED_MODEL: &str = "KGRAG_EMBED_MODEL";
pub const ENV_EMBED_API_KEY: &str = "KGRAG_EMBED_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub dataset_format: Option<String>,
    pub corpus_manifest: Option<PathBuf>,
    pub graph_store: PathBuf,
    pub out_dir: PathBuf,
    /// Embedding and gateway response caches live here when set; runs become
    /// resumable.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Remote,
}

/// Declarative scripts for the scripted gateway: per-template defaults plus
/// substring rules, enough to drive hermetic end-to-end fixtures from a
/// config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedConfig {
    pub defaults: BTreeMap<TemplateName, String>,
    pub raw_default: Option<String>,
    pub rules: Vec<ScriptRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub kind: ProviderKind,
    pub scripted: ScriptedConfig,
    pub remote: RemoteGatewayConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Scripted,
            scripted: ScriptedConfig::default(),
            remote: RemoteGatewayConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub kind: ProviderKind,
    /// Mock provider dimension.
    pub dimension: usize,
    pub remote: RemoteEmbedderConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Scripted,
            dimension: 64,
            remote: RemoteEmbedderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Retriever used by `eval`.
    pub spec: RetrieverSpec,
    /// Subgraph hops for training-time carrying rewards.
    pub carrying_hops: usize,
    /// Evidence items passed to the answer prompt in graph modes.
    pub eval_top_items: usize,
    /// Passages retrieved per query in text-mode evaluation.
    pub eval_top_passages: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            spec: RetrieverSpec::Subgraph {
                hops: 1,
                anchor_mode: crate::retrieve::AnchorMode::StringMatch,
            },
            carrying_hops: 3,
            eval_top_items: 10,
            eval_top_passages: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind_addr: String,
    pub bearer_token: Option<String>,
    /// When true the server writes one JSON line per request to stdout.
    pub request_log: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind_addr: "127.0.0.1:8080".into(), bearer_token: None, request_log: false }
    }
}

/// Decoding parameters per model role. The constructor default leaves
/// sampling to the caller's trainer; judge and answerer default to
/// deterministic decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingConfig {
    pub constructor: Decoding,
    pub answer: Decoding,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self {
            constructor: Decoding { temperature: 0.0, max_tokens: 2048, seed: None },
            answer: Decoding::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub gateway: GatewayConfig,
    pub embedding: EmbeddingConfig,
    pub retrieval: RetrievalConfig,
    pub reward: RewardConfig,
    pub ppr: PprConfig,
    pub grpo: GrpoConfig,
    pub server: ServerConfig,
    pub decoding: DecodingConfig,
}

fn env_override(target: &mut String, var: &str) {
    if let Ok(value) = std::env::var(var) {
        if !value.is_empty() {
            *target = value;
        }
    }
}

fn env_override_opt(target: &mut Option<String>, var: &str) {
    if let Ok(value) = std::env::var(var) {
        if !value.is_empty() {
            *target = Some(value);
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(raw: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(raw)
    }

    /// Applies documented environment-variable overrides to endpoint, model,
    /// and auth fields.
    pub fn apply_env_overrides(&mut self) {
        env_override(&mut self.gateway.remote.endpoint, ENV_GATEWAY_ENDPOINT);
        env_override(&mut self.gateway.remote.model, ENV_GATEWAY_MODEL);
        env_override_opt(&mut self.gateway.remote.api_key, ENV_GATEWAY_API_KEY);
        env_override(&mut self.embedding.remote.endpoint, ENV_EMBED_ENDPOINT);
        env_override(&mut self.embedding.remote.model, ENV_EMBED_MODEL);
        env_override_opt(&mut self.embedding.remote.api_key, ENV_EMBED_API_KEY);
    }

    /// The fully resolved configuration embedded in every output artifact.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Short stable hash of the resolved configuration; names run
    /// directories.
    pub fn content_hash8(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..4])
    }

    pub fn build_gateway(&self) -> Arc<dyn ChatGateway> {
        let base: Arc<dyn ChatGateway> = match self.gateway.kind {
            ProviderKind::Scripted => {
                let mut scripted = ScriptedGateway::new();
                for (template, response) in &self.gateway.scripted.defaults {
                    scripted = scripted.script_default(*template, response.clone());
                }
                if let Some(raw) = &self.gateway.scripted.raw_default {
                    scripted = scripted.script_raw_default(raw.clone());
                }
                for rule in &self.gateway.scripted.rules {
                    scripted = scripted.with_rule(rule.clone());
                }
                Arc::new(scripted)
            }
            ProviderKind::Remote => Arc::new(RemoteGateway::new(self.gateway.remote.clone())),
        };
        match &self.paths.cache_dir {
            Some(dir) => Arc::new(CachingGateway::new(base, dir.join("gateway"))),
            None => base,
        }
    }

    pub fn build_embedder(&self) -> Arc<dyn EmbeddingProvider> {
        match self.embedding.kind {
            ProviderKind::Scripted => {
                let mock = HashEmbedder::new(self.embedding.dimension);
                match &self.paths.cache_dir {
                    Some(dir) => Arc::new(
                        CachedEmbedder::new(mock).with_disk_cache(dir.join("embeddings")),
                    ),
                    None => Arc::new(mock),
                }
            }
            ProviderKind::Remote => {
                let remote = RemoteEmbedder::new(self.embedding.remote.clone());
                match &self.paths.cache_dir {
                    Some(dir) => Arc::new(
                        CachedEmbedder::new(remote).with_disk_cache(dir.join("embeddings")),
                    ),
                    None => Arc::new(remote),
                }
            }
        }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            dataset_format: None,
            corpus_manifest: None,
            graph_store: PathBuf::from("graph-store"),
            out_dir: PathBuf::from("runs"),
            cache_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_toml() {
        let config = RunConfig::default();
        let raw = toml::to_string(&config).unwrap();
        let back = RunConfig::from_toml_str(&raw).unwrap();
        assert_eq!(config.content_hash8(), back.content_hash8());
    }

    #[test]
    fn scripted_gateway_built_from_config() {
        let raw = r#"
[gateway]
kind = "scripted"

[gateway.scripted.defaults]
deducible_judge = "Yes"

[[gateway.scripted.rules]]
template = "deducible_judge"
require_contains = [["answer", "unknowable"]]
response = "No"
"#;
        let config = RunConfig::from_toml_str(raw).unwrap();
        let gateway = config.build_gateway();
        let bindings: BTreeMap<String, String> = [
            ("triples string".to_string(), "(a, r, b)".to_string()),
            ("query".to_string(), "q".to_string()),
            ("answer".to_string(), "unknowable thing".to_string()),
        ]
        .into();
        let request = crate::gateway::PromptRequest::from_template(
            TemplateName::DeducibleJudge,
            bindings,
            Decoding::default(),
        )
        .unwrap();
        assert_eq!(gateway.complete(&request).unwrap().text, "No");
    }

    #[test]
    fn env_overrides_apply() {
        let mut config = RunConfig::default();
        std::env::set_var(ENV_GATEWAY_ENDPOINT, "http://override:9999/v1/chat");
        config.apply_env_overrides();
        std::env::remove_var(ENV_GATEWAY_ENDPOINT);
        assert_eq!(config.gateway.remote.endpoint, "http://override:9999/v1/chat");
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.content_hash8(), b.content_hash8());
        b.reward.lambda_rep = 0.5;
        assert_ne!(a.content_hash8(), b.content_hash8());
    }
}
