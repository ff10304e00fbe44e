//! Route handlers and wire types.

use std::collections::BTreeMap;
use std::time::Instant;

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use kgrag_core::gateway::{PromptRequest, TemplateName};
use kgrag_core::kg::store::{EdgeRecord, GraphStats, StoreError};
use kgrag_core::kg::{build_graph, parse_triples, KgError, KnowledgeGraph, Passage, Triple};
use kgrag_core::ppr::{rank_passages, PassageRanking};
use kgrag_core::retrieve::{
    dense_triple_retrieve, subgraph_retrieve, tog_beam_search, AnchorMode, AnchorStrategy,
    GraphEvidence, RetrieverSpec,
};
use kgrag_core::score::{score_group, ScoreContext, ScoreError, ScoreRequest};

use crate::SharedState;

pub(crate) fn router(state: SharedState) -> Router {
    let mut router = Router::new()
        .route("/healthz", get(health))
        .route("/v1/config", get(show_config))
        .route("/v1/score", post(score))
        .route("/v1/retrieve", post(retrieve))
        .route("/v1/graphs", post(build_graph_endpoint))
        .route("/v1/graphs/{id}", get(graph_stats));
    if state.config.server.bearer_token.is_some() {
        router = router.layer(middleware::from_fn_with_state(state.clone(), check_bearer));
    }
    if state.config.server.request_log {
        router = router.layer(middleware::from_fn(log_request));
    }
    router.with_state(state)
}

async fn check_bearer(
    State(state): State<SharedState>,
    request: Request,
    next: Next,
) -> Response {
    let expected = state.config.server.bearer_token.as_deref().unwrap_or_default();
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(expected) || request.uri().path() == "/healthz" {
        next.run(request).await
    } else {
        ApiError::Unauthorized.into_response()
    }
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let started = Instant::now();
    let response = next.run(request).await;
    let line = serde_json::json!({
        "method": method.as_str(),
        "path": path,
        "status": response.status().as_u16(),
        "ms": started.elapsed().as_millis() as u64,
    });
    println!("{line}");
    response
}

#[derive(Debug)]
enum ApiError {
    Unprocessable(String),
    NotFound(String),
    Conflict(String),
    Upstream(String),
    Unauthorized,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Upstream(m) => (StatusCode::BAD_GATEWAY, m),
            ApiError::Unauthorized => {
                (StatusCode::UNAUTHORIZED, "missing or invalid bearer token".to_string())
            }
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

impl From<ScoreError> for ApiError {
    fn from(err: ScoreError) -> Self {
        match err {
            ScoreError::Invalid(m) => ApiError::Unprocessable(m),
            ScoreError::Upstream(e) => ApiError::Upstream(e.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound(id) => ApiError::NotFound(format!("graph `{id}` not found")),
            StoreError::IntegrityConflict { id } => {
                ApiError::Conflict(format!("graph `{id}` exists with different content"))
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

async fn health() -> &'static str {
    "ok"
}

async fn show_config(State(state): State<SharedState>) -> Json<serde_json::Value> {
    Json(state.config.resolved_json())
}

async fn score(
    State(state): State<SharedState>,
    Json(request): Json<ScoreRequest>,
) -> Result<Json<kgrag_core::score::ScoreResponse>, ApiError> {
    let response = tokio::task::spawn_blocking(move || {
        let ctx = ScoreContext {
            gateway: state.gateway.as_ref(),
            embedder: state.embedder.as_ref(),
            reward: state.config.reward,
            ppr: state.config.ppr,
            carrying_hops: state.config.retrieval.carrying_hops,
            grpo_std_floor: state.config.grpo.std_floor,
        };
        score_group(&request, &ctx)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}

/// Inline graph payload: the persistence wire shape, embedded in a request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InlineGraph {
    pub passages: Vec<Passage>,
    #[serde(default)]
    pub triples: Vec<EdgeRecord>,
}

fn build_inline(inline: InlineGraph) -> Result<KnowledgeGraph, ApiError> {
    let mut per_passage: BTreeMap<String, Vec<Triple>> = BTreeMap::new();
    for record in inline.triples {
        let triple = Triple::new(record.s, record.r, record.o)
            .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
        per_passage.entry(record.src).or_default().push(triple);
    }
    let grouped: Vec<(String, Vec<Triple>)> = per_passage.into_iter().collect();
    build_graph(&grouped, &inline.passages).map_err(|e| match e {
        KgError::UnknownPassage(_) | KgError::DuplicatePassage(_) => {
            ApiError::Unprocessable(e.to_string())
        }
        other => ApiError::Internal(other.to_string()),
    })
}

#[derive(Debug, Deserialize)]
pub struct RetrieveRequest {
    #[serde(default)]
    pub graph_ref: Option<String>,
    #[serde(default)]
    pub graph: Option<InlineGraph>,
    pub query: String,
    pub retriever: RetrieverSpec,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum RetrieveResponse {
    Evidence(GraphEvidence),
    Ranking(PassageRanking),
}

async fn retrieve(
    State(state): State<SharedState>,
    Json(request): Json<RetrieveRequest>,
) -> Result<Json<RetrieveResponse>, ApiError> {
    let response = tokio::task::spawn_blocking(move || -> Result<RetrieveResponse, ApiError> {
        let graph = match (&request.graph_ref, request.graph.clone()) {
            (Some(id), _) => state.store.get(id).map(|(graph, _)| graph)?,
            (None, Some(inline)) => build_inline(inline)?,
            (None, None) => {
                return Err(ApiError::Unprocessable(
                    "provide either graph_ref or an inline graph".into(),
                ))
            }
        };
        let result = match &request.retriever {
            RetrieverSpec::Subgraph { hops, anchor_mode } => {
                let strategy = match anchor_mode {
                    AnchorMode::StringMatch => AnchorStrategy::StringMatch,
                    AnchorMode::LlmNer => AnchorStrategy::LlmNer(state.gateway.as_ref()),
                };
                RetrieveResponse::Evidence(
                    subgraph_retrieve(&graph, &request.query, *hops, &strategy)
                        .map_err(|e| ApiError::Upstream(e.to_string()))?,
                )
            }
            RetrieverSpec::DenseTriples { k } => RetrieveResponse::Evidence(
                dense_triple_retrieve(&graph, &request.query, *k, state.embedder.as_ref())
                    .map_err(|e| ApiError::Upstream(e.to_string()))?,
            ),
            RetrieverSpec::Tog { width, depth, k_paths } => RetrieveResponse::Evidence(
                tog_beam_search(
                    &graph,
                    &request.query,
                    *width,
                    *depth,
                    *k_paths,
                    state.embedder.as_ref(),
                )
                .map_err(|e| ApiError::Upstream(e.to_string()))?,
            ),
            RetrieverSpec::TextPpr { top_n, ppr } => RetrieveResponse::Ranking(
                rank_passages(&graph, &request.query, *top_n, ppr, state.embedder.as_ref())
                    .map_err(|e| ApiError::Upstream(e.to_string()))?,
            ),
        };
        Ok(result)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageOutput {
    pub passage_id: String,
    pub raw_output: String,
}

#[derive(Debug, Deserialize)]
pub struct BuildGraphRequest {
    pub passages: Vec<Passage>,
    /// Pre-computed constructor outputs, one per passage.
    #[serde(default)]
    pub outputs: Vec<PassageOutput>,
    /// When set, ignore `outputs` and call the constructor prompt per
    /// passage through the configured gateway.
    #[serde(default)]
    pub construct: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BuildGraphResponse {
    pub id: String,
    pub stats: GraphStats,
    pub malformed_total: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_passages: Vec<String>,
}

fn construct_outputs(
    state: &SharedState,
    passages: &[Passage],
) -> Result<Vec<PassageOutput>, ApiError> {
    let decoding = state.config.decoding.constructor;
    passages
        .iter()
        .map(|p| {
            let request = PromptRequest::from_template(
                TemplateName::Construct,
                [("passage".to_string(), p.text.clone())].into(),
                decoding,
            )
            .map_err(|e| ApiError::Internal(e.to_string()))?;
            let response = state
                .gateway
                .complete(&request)
                .map_err(|e| ApiError::Upstream(e.to_string()))?;
            Ok(PassageOutput { passage_id: p.id.clone(), raw_output: response.text })
        })
        .collect()
}

async fn build_graph_endpoint(
    State(state): State<SharedState>,
    Json(request): Json<BuildGraphRequest>,
) -> Result<Json<BuildGraphResponse>, ApiError> {
    let response = tokio::task::spawn_blocking(move || -> Result<BuildGraphResponse, ApiError> {
        let outputs = if request.construct {
            construct_outputs(&state, &request.passages)?
        } else {
            request.outputs.clone()
        };
        let known: BTreeMap<&str, ()> =
            request.passages.iter().map(|p| (p.id.as_str(), ())).collect();
        let mut per_passage: Vec<(String, Vec<Triple>)> = Vec::new();
        let mut malformed_total = 0usize;
        let mut failed = Vec::new();
        for output in &outputs {
            if !known.contains_key(output.passage_id.as_str()) {
                return Err(ApiError::Unprocessable(format!(
                    "output references unknown passage `{}`",
                    output.passage_id
                )));
            }
            match parse_triples(&output.raw_output) {
                Ok(parsed) => {
                    malformed_total += parsed.malformed;
                    per_passage.push((output.passage_id.clone(), parsed.triples));
                }
                Err(_) => failed.push(output.passage_id.clone()),
            }
        }
        let graph = build_graph(&per_passage, &request.passages)
            .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
        let id = state.store.put(&graph, &request.passages)?;
        Ok(BuildGraphResponse {
            id,
            stats: GraphStats::of(&graph),
            malformed_total,
            failed_passages: failed,
        })
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}

async fn graph_stats(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let stats = state.store.stats(&id)?;
    Ok(Json(serde_json::json!({ "id": id, "stats": stats })))
}
