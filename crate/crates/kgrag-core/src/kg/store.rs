//! Graph persistence and the content-addressed graph store.
//!
//! A persisted graph is two line-delimited JSON files: `edges.jsonl` with one
//! record per fact edge and `passages.jsonl` with the passage manifest. Both
//! are written in canonical (sorted) order so the content hash of a graph is
//! stable, and loading reproduces a graph with identical node and edge sets.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{build_graph, KgError, KnowledgeGraph, Passage, Triple};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad record at {path}:{line}: {source}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("graph `{0}` not found in store")]
    NotFound(String),
    #[error("graph id `{id}` already exists with different content")]
    IntegrityConflict { id: String },
    #[error(transparent)]
    Graph(#[from] KgError),
}

/// One fact edge on disk: `{"s":…,"r":…,"o":…,"src":…}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub s: String,
    pub r: String,
    pub o: String,
    pub src: String,
}

/// Basic size counters reported for a stored graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entity_nodes: usize,
    pub passage_nodes: usize,
    pub fact_edges: usize,
    pub provenance_edges: usize,
}

impl GraphStats {
    pub fn of(graph: &KnowledgeGraph) -> Self {
        Self {
            entity_nodes: graph.entity_count(),
            passage_nodes: graph.passage_count(),
            fact_edges: graph.fact_count(),
            provenance_edges: graph.provenance_count(),
        }
    }
}

fn canonical_edge_records(graph: &KnowledgeGraph) -> Vec<EdgeRecord> {
    let mut records: Vec<EdgeRecord> = graph
        .fact_refs()
        .map(|f| EdgeRecord {
            s: f.subject.to_string(),
            r: f.relation.to_string(),
            o: f.object.to_string(),
            src: f.source.to_string(),
        })
        .collect();
    records.sort();
    records
}

fn canonical_passages(passages: &[Passage]) -> Vec<Passage> {
    let mut sorted = passages.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
}

/// Content hash over the canonical serialization of edges and manifest.
/// Two graphs with equal node/edge sets and equal manifests hash alike.
pub fn graph_content_hash(graph: &KnowledgeGraph, passages: &[Passage]) -> String {
    let mut hasher = Sha256::new();
    for record in canonical_edge_records(graph) {
        hasher.update(serde_json::to_vec(&record).expect("edge record serializes"));
        hasher.update(b"\n");
    }
    hasher.update(b"--passages--\n");
    for p in canonical_passages(passages) {
        hasher.update(serde_json::to_vec(&p).expect("passage serializes"));
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Writes `edges.jsonl` and `passages.jsonl` under `dir` in canonical order.
pub fn save_graph(
    dir: &Path,
    graph: &KnowledgeGraph,
    passages: &[Passage],
) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let edges_path = dir.join("edges.jsonl");
    let mut out = fs::File::create(&edges_path).map_err(io_err(&edges_path))?;
    for record in canonical_edge_records(graph) {
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| StoreError::Io { path: edges_path.clone(), source: e.into() })?;
        out.write_all(b"\n").map_err(io_err(&edges_path))?;
    }
    let manifest_path = dir.join("passages.jsonl");
    let mut out = fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    for p in canonical_passages(passages) {
        serde_json::to_writer(&mut out, &p)
            .map_err(|e| StoreError::Io { path: manifest_path.clone(), source: e.into() })?;
        out.write_all(b"\n").map_err(io_err(&manifest_path))?;
    }
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| StoreError::BadRecord {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Loads a graph saved by [`save_graph`]; node/edge sets match the original.
pub fn load_graph(dir: &Path) -> Result<(KnowledgeGraph, Vec<Passage>), StoreError> {
    let passages: Vec<Passage> = read_jsonl(&dir.join("passages.jsonl"))?;
    let records: Vec<EdgeRecord> = read_jsonl(&dir.join("edges.jsonl"))?;
    let mut per_passage: BTreeMap<String, Vec<Triple>> = BTreeMap::new();
    for record in records {
        per_passage
            .entry(record.src.clone())
            .or_default()
            .push(Triple::new(record.s, record.r, record.o)?);
    }
    let grouped: Vec<(String, Vec<Triple>)> = per_passage.into_iter().collect();
    let graph = build_graph(&grouped, &passages)?;
    Ok((graph, passages))
}

/// Directory of persisted graphs keyed by content hash.
pub struct GraphStore {
    root: PathBuf,
}

impl GraphStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir_of(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.dir_of(id).join("meta.json").exists()
    }

    /// Persists a graph and returns its content-hash id. Re-putting the same
    /// content is a no-op; an existing id whose stored bytes hash differently
    /// is an integrity conflict.
    pub fn put(
        &self,
        graph: &KnowledgeGraph,
        passages: &[Passage],
    ) -> Result<String, StoreError> {
        let id = graph_content_hash(graph, passages);
        let dir = self.dir_of(id.as_str());
        if self.contains(&id) {
            let (stored, stored_passages) = load_graph(&dir)?;
            if graph_content_hash(&stored, &stored_passages) != id {
                return Err(StoreError::IntegrityConflict { id });
            }
            return Ok(id);
        }
        save_graph(&dir, graph, passages)?;
        let meta_path = dir.join("meta.json");
        let meta = serde_json::json!({ "id": id, "stats": GraphStats::of(graph) });
        fs::write(&meta_path, serde_json::to_vec_pretty(&meta).expect("meta serializes"))
            .map_err(io_err(&meta_path))?;
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<(KnowledgeGraph, Vec<Passage>), StoreError> {
        if !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        load_graph(&self.dir_of(id))
    }

    pub fn stats(&self, id: &str) -> Result<GraphStats, StoreError> {
        let meta_path = self.dir_of(id).join("meta.json");
        if !meta_path.exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let raw = fs::read(&meta_path).map_err(io_err(&meta_path))?;
        let meta: serde_json::Value =
            serde_json::from_slice(&raw).map_err(|source| StoreError::BadRecord {
                path: meta_path.clone(),
                line: 1,
                source,
            })?;
        let stats = serde_json::from_value(meta["stats"].clone()).map_err(|source| {
            StoreError::BadRecord { path: meta_path, line: 1, source }
        })?;
        Ok(stats)
    }
}
