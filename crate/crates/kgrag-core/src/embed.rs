//! Embedding providers and similarity utilities.
//!
//! Retrieval only ever needs two things from an embedding model: vectors and
//! cosine similarity. [`EmbeddingProvider`] abstracts the model; the
//! [`HashEmbedder`] mock derives a deterministic unit vector from each text's
//! hashed tokens so tests and offline runs stay reproducible, while
//! [`RemoteEmbedder`] speaks the OpenAI-compatible embeddings shape. Corpus
//! scale here is small enough that retrieval is a linear scan.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::RwLock;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("provider returned {got} vectors for {want} inputs")]
    CountMismatch { want: usize, got: usize },
    #[error("embedding endpoint unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("embedding cache io: {0}")]
    Cache(String),
}

/// A fixed-length vector of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity in [-1, 1]; zero when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.l2_norm();
    let nb = b.l2_norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// The `k` highest-cosine candidates, descending; ties broken by ascending
/// id. Returns everything when there are fewer than `k` candidates.
pub fn top_k_similar(
    query: &EmbeddingVector,
    candidates: &[(String, EmbeddingVector)],
    k: usize,
) -> Result<Vec<(String, f64)>, EmbedError> {
    let mut scored: Vec<(String, f64)> = candidates
        .iter()
        .map(|(id, v)| Ok((id.clone(), cosine(query, v)?)))
        .collect::<Result<_, EmbedError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// A batching text-embedding backend. Implementations must be pure per text:
/// the same input yields the same vector for the provider's lifetime.
pub trait EmbeddingProvider: Send + Sync {
    /// Identifier used for cache keys; distinct providers must not collide.
    fn id(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed(std::slice::from_ref(&text.to_string()))?;
        out.pop().ok_or(EmbedError::CountMismatch { want: 1, got: 0 })
    }
}

/// Deterministic mock provider: each token hashes to a fixed pseudo-random
/// direction, a text embeds to the normalized sum of its token directions.
/// Texts sharing tokens therefore score higher than unrelated ones, which
/// keeps retrieval fixtures meaningful without a real model.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dimension: 64 }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    fn token_direction(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::digest(token.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut v: Vec<f64> =
            (0..self.dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        v
    }

    fn embed_text(&self, text: &str) -> EmbeddingVector {
        let lowered = text.to_lowercase();
        let mut tokens: Vec<&str> =
            lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            tokens.push("");
        }
        let mut sum = vec![0.0f64; self.dimension];
        for token in tokens {
            for (acc, x) in sum.iter_mut().zip(self.token_direction(token)) {
                *acc += x;
            }
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut sum {
                *x /= norm;
            }
        }
        EmbeddingVector(sum)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-embedder-d{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// OpenAI-compatible remote embeddings endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteEmbedderConfig {
    /// Full URL of the embeddings endpoint, e.g. `http://host/v1/embeddings`.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub dimension: usize,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub batch_size: usize,
}

impl Default for RemoteEmbedderConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8100/v1/embeddings".into(),
            model: "embedding-model".into(),
            api_key: None,
            dimension: 1024,
            max_retries: 3,
            retry_backoff_ms: 250,
            batch_size: 64,
        }
    }
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client builds");
        Self { config, client }
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = EmbedRequest { model: &self.config.model, input: texts };
        let mut last_err = String::new();
        let attempts = self.config.max_retries.max(1);
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.config.retry_backoff_ms << (attempt - 1),
                ));
            }
            let mut req = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: EmbedResponse = resp
                        .json()
                        .map_err(|e| EmbedError::Provider(format!("bad response body: {e}")))?;
                    let mut data = parsed.data;
                    data.sort_by_key(|d| d.index);
                    if data.len() != texts.len() {
                        return Err(EmbedError::CountMismatch {
                            want: texts.len(),
                            got: data.len(),
                        });
                    }
                    let vectors: Vec<EmbeddingVector> =
                        data.into_iter().map(|d| EmbeddingVector(d.embedding)).collect();
                    for v in &vectors {
                        if v.dimension() != self.config.dimension {
                            return Err(EmbedError::DimensionMismatch {
                                left: self.config.dimension,
                                right: v.dimension(),
                            });
                        }
                    }
                    return Ok(vectors);
                }
                Ok(resp) => {
                    last_err = format!("http {}", resp.status());
                    // 4xx will not get better on retry.
                    if resp.status().is_client_error() {
                        return Err(EmbedError::Provider(last_err));
                    }
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(EmbedError::Transport { attempts, message: last_err })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.config.endpoint, self.config.model)
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size.max(1)) {
            out.extend(self.embed_batch(batch)?);
        }
        Ok(out)
    }
}

/// Wraps a provider with an in-memory map and an optional on-disk cache, one
/// file per (provider id, text hash) key. Readers share the map; each miss is
/// written once.
pub struct CachedEmbedder<P> {
    inner: P,
    memory: RwLock<HashMap<String, EmbeddingVector>>,
    disk_dir: Option<PathBuf>,
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, memory: RwLock::new(HashMap::new()), disk_dir: None }
    }

    /// Persist entries under `dir/<provider id hash>/<text hash>.json`.
    pub fn with_disk_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.disk_dir = Some(dir.into());
        self
    }

    fn key(&self, text: &str) -> String {
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn disk_path(&self, key: &str) -> Option<PathBuf> {
        let dir = self.disk_dir.as_ref()?;
        let provider_dir = hex::encode(&Sha256::digest(self.inner.id().as_bytes())[..8]);
        Some(dir.join(provider_dir).join(format!("{key}.json")))
    }

    fn load_disk(&self, key: &str) -> Option<EmbeddingVector> {
        let path = self.disk_path(key)?;
        let raw = fs::read(path).ok()?;
        serde_json::from_slice(&raw).ok()
    }

    fn store_disk(&self, key: &str, vector: &EmbeddingVector) -> Result<(), EmbedError> {
        let Some(path) = self.disk_path(key) else { return Ok(()) };
        let parent = path.parent().expect("cache path has parent");
        fs::create_dir_all(parent).map_err(|e| EmbedError::Cache(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(vector).expect("vector serializes"))
            .map_err(|e| EmbedError::Cache(e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| EmbedError::Cache(e.to_string()))?;
        Ok(())
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let keys: Vec<String> = texts.iter().map(|t| self.key(t)).collect();
        let mut results: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        {
            let memory = self.memory.read().expect("cache lock");
            for (i, key) in keys.iter().enumerate() {
                if let Some(hit) = memory.get(key) {
                    results[i] = Some(hit.clone());
                }
            }
        }
        for (i, key) in keys.iter().enumerate() {
            if results[i].is_none() {
                if let Some(hit) = self.load_disk(key) {
                    results[i] = Some(hit);
                }
            }
        }
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| results[i].is_none()).collect();
        if !missing.is_empty() {
            let todo: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let fresh = self.inner.embed(&todo)?;
            if fresh.len() != todo.len() {
                return Err(EmbedError::CountMismatch { want: todo.len(), got: fresh.len() });
            }
            let mut memory = self.memory.write().expect("cache lock");
            for (&i, vector) in missing.iter().zip(fresh) {
                self.store_disk(&keys[i], &vector)?;
                memory.insert(keys[i].clone(), vector.clone());
                results[i] = Some(vector);
            }
        }
        Ok(results.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
