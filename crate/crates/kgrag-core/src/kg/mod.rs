//! Knowledge-graph domain types and construction.
//!
//! A graph holds two disjoint node namespaces: entity nodes (normalized
//! labels) and passage nodes (corpus passage ids). Fact edges connect
//! entities and remember the passage they were extracted from; provenance
//! edges connect every entity to each passage that mentions it in a fact.
//! Graphs are immutable after [`build_graph`] and safe to share across
//! threads.

mod parse;
pub mod store;

pub use parse::{normalize_entity, parse_json_array, parse_triples, ParsedTriples};

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("no JSON array found in constructor output")]
    NoJsonArray,
    #[error("entity label is empty after normalization")]
    EmptyEntity,
    #[error("triple {0} is empty after trimming")]
    EmptyTripleField(&'static str),
    #[error("unknown passage id `{0}`")]
    UnknownPassage(String),
    #[error("duplicate passage id `{0}`")]
    DuplicatePassage(String),
    #[error("sample gold passage id `{0}` is not among its context passages")]
    GoldNotInContext(String),
}

/// One (subject, relation, object) fact. Fields are trimmed and non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self, KgError> {
        let subject = subject.into().trim().to_string();
        let relation = relation.into().trim().to_string();
        let object = object.into().trim().to_string();
        if subject.is_empty() {
            return Err(KgError::EmptyTripleField("subject"));
        }
        if relation.is_empty() {
            return Err(KgError::EmptyTripleField("relation"));
        }
        if object.is_empty() {
            return Err(KgError::EmptyTripleField("object"));
        }
        Ok(Self { subject, relation, object })
    }

    /// Normalized (subject, relation, object) key used for duplicate counting.
    pub fn normalized_key(&self) -> (String, String, String) {
        (
            normalize_lossy(&self.subject),
            normalize_lossy(&self.relation),
            normalize_lossy(&self.object),
        )
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.relation, self.object)
    }
}

fn normalize_lossy(s: &str) -> String {
    normalize_entity(s).unwrap_or_default()
}

/// A corpus text chunk. `id` must be unique within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source_doc: String,
}

impl Passage {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), text: text.into(), source_doc: String::new() }
    }
}

/// One QA instance: the query, its gold answer, the per-query document pool,
/// and which pool passages are gold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QASample {
    pub query: String,
    pub gold_answer: String,
    pub context_passages: Vec<Passage>,
    pub gold_passage_ids: BTreeSet<String>,
}

impl QASample {
    pub fn validate(&self) -> Result<(), KgError> {
        let ids: HashSet<&str> = self.context_passages.iter().map(|p| p.id.as_str()).collect();
        for gold in &self.gold_passage_ids {
            if !ids.contains(gold.as_str()) {
                return Err(KgError::GoldNotInContext(gold.clone()));
            }
        }
        Ok(())
    }
}

/// A fact edge between two entity nodes, tagged with the passage it came
/// from. Indices refer to the owning graph's node tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactEdge {
    pub subject: usize,
    pub relation: String,
    pub object: usize,
    pub source: usize,
}

/// Resolved, human-readable view of one fact edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FactRef<'g> {
    pub subject: &'g str,
    pub relation: &'g str,
    pub object: &'g str,
    pub source: &'g str,
}

impl FactRef<'_> {
    /// `(s, r, o)` form used when evidence is shown to a model.
    pub fn display_text(&self) -> String {
        format!("({}, {}, {})", self.subject, self.relation, self.object)
    }

    /// `s r o` form used when a fact is embedded.
    pub fn embed_text(&self) -> String {
        format!("{} {} {}", self.subject, self.relation, self.object)
    }

    pub fn to_triple(&self) -> Triple {
        Triple {
            subject: self.subject.to_string(),
            relation: self.relation.to_string(),
            object: self.object.to_string(),
        }
    }
}

/// Directed labeled multigraph over entity and passage nodes.
///
/// Entity labels are normalized; passage ids keep their corpus spelling.
/// The two namespaces are disjoint by construction. Traversal helpers treat
/// fact edges as undirected.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    entity_index: HashMap<String, usize>,
    passages: Vec<String>,
    passage_index: HashMap<String, usize>,
    facts: Vec<FactEdge>,
    /// entity idx -> incident fact edge indices (as subject or object)
    entity_facts: Vec<Vec<usize>>,
    /// entity idx -> passage idxs with a provenance edge
    entity_passages: Vec<Vec<usize>>,
    /// passage idx -> entity idxs with a provenance edge
    passage_entities: Vec<Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn passage_count(&self) -> usize {
        self.passages.len()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn provenance_count(&self) -> usize {
        self.entity_passages.iter().map(Vec::len).sum()
    }

    pub fn entity_label(&self, idx: usize) -> &str {
        &self.entities[idx]
    }

    pub fn passage_id(&self, idx: usize) -> &str {
        &self.passages[idx]
    }

    pub fn entity_idx(&self, normalized_label: &str) -> Option<usize> {
        self.entity_index.get(normalized_label).copied()
    }

    pub fn passage_idx(&self, id: &str) -> Option<usize> {
        self.passage_index.get(id).copied()
    }

    pub fn entity_labels(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    pub fn passage_ids(&self) -> impl Iterator<Item = &str> {
        self.passages.iter().map(String::as_str)
    }

    pub fn fact_edges(&self) -> &[FactEdge] {
        &self.facts
    }

    pub fn fact_ref(&self, idx: usize) -> FactRef<'_> {
        let e = &self.facts[idx];
        FactRef {
            subject: &self.entities[e.subject],
            relation: &e.relation,
            object: &self.entities[e.object],
            source: &self.passages[e.source],
        }
    }

    pub fn fact_refs(&self) -> impl Iterator<Item = FactRef<'_>> {
        (0..self.facts.len()).map(|i| self.fact_ref(i))
    }

    /// Fact edge indices incident to an entity (either endpoint).
    pub fn facts_of_entity(&self, entity: usize) -> &[usize] {
        &self.entity_facts[entity]
    }

    pub fn passages_of_entity(&self, entity: usize) -> &[usize] {
        &self.entity_passages[entity]
    }

    pub fn entities_of_passage(&self, passage: usize) -> &[usize] {
        &self.passage_entities[passage]
    }

    /// Provenance edges as (entity label, passage id) pairs.
    pub fn provenance_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entity_passages.iter().enumerate().flat_map(move |(e, ps)| {
            ps.iter().map(move |&p| (self.entities[e].as_str(), self.passages[p].as_str()))
        })
    }

    /// Set-level equality on nodes and edges, independent of internal index
    /// order. This is the equality graph persistence must preserve.
    pub fn same_content(&self, other: &KnowledgeGraph) -> bool {
        let nodes = |g: &KnowledgeGraph| -> (BTreeSet<String>, BTreeSet<String>) {
            (g.entities.iter().cloned().collect(), g.passages.iter().cloned().collect())
        };
        let edges = |g: &KnowledgeGraph| -> BTreeSet<(String, String, String, String)> {
            g.fact_refs()
                .map(|f| {
                    (
                        f.subject.to_string(),
                        f.relation.to_string(),
                        f.object.to_string(),
                        f.source.to_string(),
                    )
                })
                .collect()
        };
        nodes(self) == nodes(other) && edges(self) == edges(other)
    }

    /// Re-checks the structural invariants. Used by property tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, e) in self.facts.iter().enumerate() {
            if e.subject >= self.entities.len() || e.object >= self.entities.len() {
                return Err(format!("fact edge {i} has a dangling entity endpoint"));
            }
            if e.source >= self.passages.len() {
                return Err(format!("fact edge {i} has a dangling source passage"));
            }
        }
        let entity_set: HashSet<&str> = self.entities.iter().map(String::as_str).collect();
        for p in &self.passages {
            if entity_set.contains(p.as_str()) {
                // Namespaces are separate index spaces; shared spellings are
                // still two distinct nodes. Nothing to reject here.
            }
        }
        // Every fact endpoint must have provenance to the fact's source.
        for e in &self.facts {
            for endpoint in [e.subject, e.object] {
                if !self.entity_passages[endpoint].contains(&e.source) {
                    return Err(format!(
                        "entity `{}` lacks provenance to `{}`",
                        self.entities[endpoint], self.passages[e.source]
                    ));
                }
            }
        }
        // Provenance symmetry.
        for (e, ps) in self.entity_passages.iter().enumerate() {
            for &p in ps {
                if !self.passage_entities[p].contains(&e) {
                    return Err("asymmetric provenance adjacency".to_string());
                }
            }
        }
        Ok(())
    }
}

/// Merges per-passage triples into a corpus-level graph.
///
/// Entities are merged by [`normalize_entity`]; duplicate fact edges from the
/// same passage collapse to one, while the same fact extracted from two
/// passages keeps one edge per source. Every passage in `passages` becomes a
/// passage node even when it produced no triples.
pub fn build_graph(
    per_passage_triples: &[(String, Vec<Triple>)],
    passages: &[Passage],
) -> Result<KnowledgeGraph, KgError> {
    let mut graph = KnowledgeGraph::default();
    for p in passages {
        if graph.passage_index.contains_key(&p.id) {
            return Err(KgError::DuplicatePassage(p.id.clone()));
        }
        graph.passage_index.insert(p.id.clone(), graph.passages.len());
        graph.passages.push(p.id.clone());
        graph.passage_entities.push(Vec::new());
    }

    let intern = |graph: &mut KnowledgeGraph, label: &str| -> Result<usize, KgError> {
        let normalized = normalize_entity(label)?;
        if let Some(&idx) = graph.entity_index.get(&normalized) {
            return Ok(idx);
        }
        let idx = graph.entities.len();
        graph.entity_index.insert(normalized.clone(), idx);
        graph.entities.push(normalized);
        graph.entity_facts.push(Vec::new());
        graph.entity_passages.push(Vec::new());
        Ok(idx)
    };

    let mut seen_edges: HashSet<(usize, String, usize, usize)> = HashSet::new();
    let mut seen_provenance: HashSet<(usize, usize)> = HashSet::new();
    for (passage_id, triples) in per_passage_triples {
        let source = *graph
            .passage_index
            .get(passage_id)
            .ok_or_else(|| KgError::UnknownPassage(passage_id.clone()))?;
        for t in triples {
            let subject = intern(&mut graph, &t.subject)?;
            let object = intern(&mut graph, &t.object)?;
            let key = (subject, t.relation.clone(), object, source);
            if !seen_edges.insert(key) {
                continue;
            }
            let edge_idx = graph.facts.len();
            graph.facts.push(FactEdge {
                subject,
                relation: t.relation.clone(),
                object,
                source,
            });
            graph.entity_facts[subject].push(edge_idx);
            if object != subject {
                graph.entity_facts[object].push(edge_idx);
            }
            for endpoint in [subject, object] {
                if seen_provenance.insert((endpoint, source)) {
                    graph.entity_passages[endpoint].push(source);
                    graph.passage_entities[source].push(endpoint);
                }
            }
        }
    }
    Ok(graph)
}

/// All fact edges of the k-hop neighborhood around the anchors.
///
/// Anchors are normalized first; unknown anchors contribute nothing. Fact
/// edges are traversed undirected, and an edge belongs to the neighborhood
/// when both endpoints lie within `k` hops of some anchor. The result is
/// deduplicated and sorted by (subject, relation, object).
pub fn khop_neighborhood<S: AsRef<str>>(
    graph: &KnowledgeGraph,
    anchors: &[S],
    k: usize,
) -> Vec<Triple> {
    debug_assert!(k >= 1, "khop_neighborhood expects k >= 1");
    let mut distance: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for anchor in anchors {
        let Ok(normalized) = normalize_entity(anchor.as_ref()) else { continue };
        if let Some(idx) = graph.entity_idx(&normalized) {
            if !distance.contains_key(&idx) {
                distance.insert(idx, 0);
                queue.push_back(idx);
            }
        }
    }
    while let Some(node) = queue.pop_front() {
        let d = distance[&node];
        if d == k {
            continue;
        }
        for &edge_idx in graph.facts_of_entity(node) {
            let e = &graph.fact_edges()[edge_idx];
            let next = if e.subject == node { e.object } else { e.subject };
            if !distance.contains_key(&next) {
                distance.insert(next, d + 1);
                queue.push_back(next);
            }
        }
    }
    let mut unique: BTreeSet<(String, String, String)> = BTreeSet::new();
    for f in graph.fact_edges() {
        if distance.contains_key(&f.subject) && distance.contains_key(&f.object) {
            unique.insert((
                graph.entity_label(f.subject).to_string(),
                f.relation.clone(),
                graph.entity_label(f.object).to_string(),
            ));
        }
    }
    unique
        .into_iter()
        .map(|(subject, relation, object)| Triple { subject, relation, object })
        .collect()
}
