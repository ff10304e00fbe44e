//! Graph-based RAG engine and RL reward environment.
//!
//! The crate turns raw constructor-model output into a knowledge graph,
//! retrieves evidence from it (subgraph expansion, dense triple retrieval,
//! beam search, and PPR-based passage ranking), scores the graph's usefulness
//! with task-aware rewards, and evaluates the resulting QA pipeline. All LLM
//! and embedding access goes through mockable gateways so every computation
//! is reproducible offline.
//!
//! Module map:
//!
//! - [`kg`] — triples, passages, graph construction and persistence
//! - [`embed`] — embedding providers, cosine similarity, top-k scan
//! - [`gateway`] — chat-completion gateway and the prompt templates
//! - [`retrieve`] — graph-evidence retrievers (subgraph, dense triples, beam)
//! - [`ppr`] — personalized PageRank passage ranking
//! - [`reward`] — knowledge-carrying / knowledge-indexing rewards
//! - [`grpo`] — group-relative advantages and the clipped surrogate objective
//! - [`ingest`] — dataset loading, pool assembly, hard-negative mining
//! - [`eval`] — answer F1, recall@k, QA and MCQ harnesses
//! - [`score`] — the per-group scoring loop shared by the CLI and HTTP server
//! - [`config`] — run configuration and provider wiring

pub mod config;
pub mod embed;
pub mod eval;
pub mod gateway;
pub mod grpo;
pub mod ingest;
pub mod kg;
pub mod ppr;
pub mod retrieve;
pub mod reward;
pub mod score;

pub use embed::{cosine, top_k_similar, EmbeddingProvider, EmbeddingVector, HashEmbedder};
pub use gateway::{ChatGateway, ChatResponse, Decoding, ScriptedGateway, TemplateName};
pub use kg::{KnowledgeGraph, Passage, QASample, Triple};
pub use ppr::{PassageRanking, PprConfig};
pub use retrieve::{EvidenceKind, GraphEvidence, RetrieverSpec};
pub use reward::RewardOutcome;
pub use score::{ScoreRequest, ScoreResponse};
