//! The frozen RAG server: an HTTP face over the scoring, retrieval, and
//! graph-store operations so an external trainer can use this artifact as
//! its reward environment.
//!
//! Handlers are thin: request validation and error mapping here, all domain
//! logic in `kgrag-core`. Scoring runs on the blocking pool because the core
//! is synchronous; state is immutable shared configuration plus the
//! content-addressed graph store, so requests never contend on locks.

mod routes;

use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;
use kgrag_core::config::RunConfig;
use kgrag_core::embed::EmbeddingProvider;
use kgrag_core::gateway::ChatGateway;
use kgrag_core::kg::store::GraphStore;
use tokio::net::TcpListener;

pub use routes::{BuildGraphRequest, BuildGraphResponse, PassageOutput, RetrieveRequest};

pub struct AppState {
    pub config: RunConfig,
    pub gateway: Arc<dyn ChatGateway>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub store: GraphStore,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    /// Wires providers and the graph store from a run configuration.
    pub fn from_config(config: RunConfig) -> SharedState {
        let gateway = config.build_gateway();
        let embedder = config.build_embedder();
        let store = GraphStore::new(store_root(&config));
        Arc::new(AppState { config, gateway, embedder, store })
    }

    pub fn with_providers(
        config: RunConfig,
        gateway: Arc<dyn ChatGateway>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> SharedState {
        let store = GraphStore::new(store_root(&config));
        Arc::new(AppState { config, gateway, embedder, store })
    }
}

fn store_root(config: &RunConfig) -> PathBuf {
    config.paths.graph_store.clone()
}

pub fn build_router(state: SharedState) -> Router {
    routes::router(state)
}

/// Serves until the shutdown future resolves, draining in-flight requests.
pub async fn serve(
    state: SharedState,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = build_router(state);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
