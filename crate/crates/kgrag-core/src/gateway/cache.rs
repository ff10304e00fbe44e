//! Read-through disk cache for gateway responses.
//!
//! Keys are hashes of (template, prompt text, decoding), one JSON file per
//! key. Corpus-scale construction runs become resumable: a re-run replays
//! cached responses instead of calling the model again.

use std::fs;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::{ChatGateway, ChatResponse, GatewayError, PromptRequest};

pub struct CachingGateway<G> {
    inner: G,
    dir: PathBuf,
}

impl<G: ChatGateway> CachingGateway<G> {
    pub fn new(inner: G, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into() }
    }

    fn key(&self, request: &PromptRequest) -> String {
        let mut hasher = Sha256::new();
        hasher.update(request.template.map_or("raw", |t| t.as_str()).as_bytes());
        hasher.update([0]);
        hasher.update(request.text.as_bytes());
        hasher.update([0]);
        hasher.update(serde_json::to_vec(&request.decoding).expect("decoding serializes"));
        hex::encode(hasher.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }
}

impl<G: ChatGateway> ChatGateway for CachingGateway<G> {
    fn complete(&self, request: &PromptRequest) -> Result<ChatResponse, GatewayError> {
        let key = self.key(request);
        let path = self.path(&key);
        if let Ok(raw) = fs::read(&path) {
            if let Ok(hit) = serde_json::from_slice::<ChatResponse>(&raw) {
                return Ok(hit);
            }
        }
        let response = self.inner.complete(request)?;
        fs::create_dir_all(&self.dir)
            .map_err(|e| GatewayError::Provider(format!("cache dir: {e}")))?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(&response).expect("response serializes"))
            .map_err(|e| GatewayError::Provider(format!("cache write: {e}")))?;
        fs::rename(&tmp, &path)
            .map_err(|e| GatewayError::Provider(format!("cache rename: {e}")))?;
        Ok(response)
    }
}
