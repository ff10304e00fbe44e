//! Graph-evidence retrievers.
//!
//! Three ways to pull structured evidence out of a graph for a query:
//!
//! - [`subgraph_retrieve`] — anchor entities in the query, expand the k-hop
//!   neighborhood around them;
//! - [`dense_triple_retrieve`] — embed every fact and rank by cosine
//!   similarity to the query;
//! - [`tog_beam_search`] — beam search over edges, scoring each step by
//!   query similarity and each path by the mean of its edge scores.
//!
//! All three are pure given a graph and an embedding provider, and treat
//! fact edges as traversable in both directions (multi-hop questions walk
//! relations like "father of" backwards).

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine, EmbedError, EmbeddingProvider};
use crate::gateway::{ChatGateway, Decoding, GatewayError, PromptRequest};
use crate::kg::{normalize_entity, parse_json_array, KnowledgeGraph};
use crate::ppr::PprConfig;

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Subgraph,
    DenseTriples,
    TogPaths,
}

/// Ranked structured evidence. Items are `(s, r, o)` strings; path items join
/// edges with `" → "`. `items` and `scores` are parallel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEvidence {
    pub items: Vec<String>,
    pub scores: Vec<f64>,
    pub kind: EvidenceKind,
}

impl GraphEvidence {
    pub fn empty(kind: EvidenceKind) -> Self {
        Self { items: Vec::new(), scores: Vec::new(), kind }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Newline-joined form bound to the answer/judge prompts.
    pub fn joined(&self) -> String {
        self.items.join("\n")
    }

    pub fn truncated(mut self, n: usize) -> Self {
        self.items.truncate(n);
        self.scores.truncate(n);
        self
    }
}

/// How query anchors are found for the subgraph and beam retrievers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// Graph entities occurring as whole-word substrings of the query.
    /// Deterministic; the default for training-time reward computation.
    StringMatch,
    /// Entities proposed by the gateway's NER call, then normalized.
    LlmNer,
}

impl Default for AnchorMode {
    fn default() -> Self {
        AnchorMode::StringMatch
    }
}

/// Anchor strategy with the gateway needed for NER, when applicable.
pub enum AnchorStrategy<'a> {
    StringMatch,
    LlmNer(&'a dyn ChatGateway),
}

const NER_PROMPT: &str = "Extract the named entities mentioned in the question below. Respond with a JSON array of entity strings and nothing else.\n\nQuestion: ";

/// Entity labels present in the graph that occur in the normalized query as
/// whole-word substrings, sorted for determinism.
pub fn string_match_anchors(graph: &KnowledgeGraph, query: &str) -> Vec<String> {
    let Ok(query) = normalize_entity(query) else { return Vec::new() };
    let query_bytes = query.as_bytes();
    let boundary = |idx: usize| -> bool {
        if idx == 0 || idx >= query.len() {
            return true;
        }
        // Labels are matched at char boundaries only; match_indices
        // guarantees that, so byte-level ASCII checks need a char lookup.
        match query[..idx].chars().next_back() {
            Some(c) => !c.is_alphanumeric(),
            None => true,
        }
    };
    let mut anchors: BTreeSet<String> = BTreeSet::new();
    for label in graph.entity_labels() {
        for (start, matched) in query.match_indices(label) {
            let end = start + matched.len();
            let left_ok = boundary(start);
            let right_ok = end == query_bytes.len()
                || query[end..].chars().next().is_some_and(|c| !c.is_alphanumeric());
            if left_ok && right_ok {
                anchors.insert(label.to_string());
                break;
            }
        }
    }
    anchors.into_iter().collect()
}

/// Anchors proposed by an LLM NER call, kept only when they normalize to a
/// graph entity. Output that contains no JSON array yields no anchors.
pub fn llm_ner_anchors(
    graph: &KnowledgeGraph,
    query: &str,
    gateway: &dyn ChatGateway,
) -> Result<Vec<String>, RetrieveError> {
    let request = PromptRequest::raw(format!("{NER_PROMPT}{query}"), Decoding::default());
    let response = gateway.complete(&request)?;
    let Some(items) = parse_json_array(&response.text) else { return Ok(Vec::new()) };
    let mut anchors: BTreeSet<String> = BTreeSet::new();
    for item in items {
        let Some(raw) = item.as_str() else { continue };
        let Ok(normalized) = normalize_entity(raw) else { continue };
        if graph.entity_idx(&normalized).is_some() {
            anchors.insert(normalized);
        }
    }
    Ok(anchors.into_iter().collect())
}

fn resolve_anchors(
    graph: &KnowledgeGraph,
    query: &str,
    strategy: &AnchorStrategy<'_>,
) -> Result<Vec<String>, RetrieveError> {
    match strategy {
        AnchorStrategy::StringMatch => Ok(string_match_anchors(graph, query)),
        AnchorStrategy::LlmNer(gateway) => llm_ner_anchors(graph, query, *gateway),
    }
}

/// K-hop neighborhood evidence around query anchors; every item scores 1.0.
/// Empty evidence (no anchors, or isolated anchors) is a valid result.
pub fn subgraph_retrieve(
    graph: &KnowledgeGraph,
    query: &str,
    hops: usize,
    strategy: &AnchorStrategy<'_>,
) -> Result<GraphEvidence, RetrieveError> {
    let anchors = resolve_anchors(graph, query, strategy)?;
    let triples = crate::kg::khop_neighborhood(graph, &anchors, hops);
    let items: Vec<String> = triples.iter().map(|t| t.to_string()).collect();
    let scores = vec![1.0; items.len()];
    Ok(GraphEvidence { items, scores, kind: EvidenceKind::Subgraph })
}

/// Cosine scores for every fact edge against the query, computed with one
/// batched embedding call over the distinct `s r o` texts.
pub(crate) fn edge_similarities(
    graph: &KnowledgeGraph,
    query: &str,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<f64>, EmbedError> {
    let texts: Vec<String> = graph.fact_refs().map(|f| f.embed_text()).collect();
    let mut unique: Vec<String> = Vec::new();
    let mut index_of: HashMap<&str, usize> = HashMap::new();
    for text in &texts {
        if !index_of.contains_key(text.as_str()) {
            index_of.insert(text.as_str(), unique.len());
            unique.push(text.clone());
        }
    }
    let query_vec = embedder.embed_one(query)?;
    let vectors = embedder.embed(&unique)?;
    if vectors.len() != unique.len() {
        return Err(EmbedError::CountMismatch { want: unique.len(), got: vectors.len() });
    }
    let mut unique_scores = Vec::with_capacity(unique.len());
    for v in &vectors {
        unique_scores.push(cosine(&query_vec, v)?);
    }
    Ok(texts.iter().map(|t| unique_scores[index_of[t.as_str()]]).collect())
}

/// Top-k fact edges by embedding similarity to the query, descending; ties
/// break by linearization then source passage id.
pub fn dense_triple_retrieve(
    graph: &KnowledgeGraph,
    query: &str,
    k: usize,
    embedder: &dyn EmbeddingProvider,
) -> Result<GraphEvidence, RetrieveError> {
    if graph.fact_count() == 0 {
        return Ok(GraphEvidence::empty(EvidenceKind::DenseTriples));
    }
    let scores = edge_similarities(graph, query, embedder)?;
    let mut order: Vec<usize> = (0..graph.fact_count()).collect();
    order.sort_by(|&a, &b| {
        scores[b].total_cmp(&scores[a]).then_with(|| {
            let fa = graph.fact_ref(a);
            let fb = graph.fact_ref(b);
            fa.display_text().cmp(&fb.display_text()).then_with(|| fa.source.cmp(fb.source))
        })
    });
    order.truncate(k);
    Ok(GraphEvidence {
        items: order.iter().map(|&i| graph.fact_ref(i).display_text()).collect(),
        scores: order.iter().map(|&i| scores[i]).collect(),
        kind: EvidenceKind::DenseTriples,
    })
}

#[derive(Clone)]
struct Beam {
    nodes: Vec<usize>,
    edges: Vec<usize>,
    score_sum: f64,
}

impl Beam {
    fn tip(&self) -> usize {
        *self.nodes.last().expect("beam has a start node")
    }

    fn mean_score(&self) -> f64 {
        self.score_sum / self.edges.len() as f64
    }

    fn display(&self, graph: &KnowledgeGraph) -> String {
        self.edges
            .iter()
            .map(|&e| graph.fact_ref(e).display_text())
            .collect::<Vec<_>>()
            .join(" → ")
    }
}

/// Beam search over fact edges in the style of graph reasoning-path
/// retrievers.
///
/// Beams start at string-matched anchors. At each depth level every beam
/// proposes its `width` best continuations (edges incident to the tip whose
/// far endpoint is not yet on the path, scored by query similarity), and the
/// `width` best extended beams overall survive, ranked by mean edge score.
/// Dead-ended beams are kept as maximal paths. Returns the top `k_paths`
/// complete-or-maximal paths.
pub fn tog_beam_search(
    graph: &KnowledgeGraph,
    query: &str,
    width: usize,
    depth: usize,
    k_paths: usize,
    embedder: &dyn EmbeddingProvider,
) -> Result<GraphEvidence, RetrieveError> {
    debug_assert!(width >= 1 && depth >= 1);
    let anchors = string_match_anchors(graph, query);
    if anchors.is_empty() || graph.fact_count() == 0 {
        return Ok(GraphEvidence::empty(EvidenceKind::TogPaths));
    }
    let edge_scores = edge_similarities(graph, query, embedder)?;

    let mut beams: Vec<Beam> = anchors
        .iter()
        .filter_map(|label| graph.entity_idx(label))
        .map(|idx| Beam { nodes: vec![idx], edges: Vec::new(), score_sum: 0.0 })
        .collect();
    let mut finished: Vec<Beam> = Vec::new();

    for _level in 0..depth {
        let mut extended: Vec<Beam> = Vec::new();
        for beam in &beams {
            let tip = beam.tip();
            // (edge display, far node) -> candidate; parallel edges with the
            // same linearization collapse to one continuation.
            let mut candidates: Vec<(usize, usize)> = Vec::new();
            let mut seen: BTreeSet<(String, usize)> = BTreeSet::new();
            for &edge_idx in graph.facts_of_entity(tip) {
                let e = &graph.fact_edges()[edge_idx];
                let far = if e.subject == tip { e.object } else { e.subject };
                if beam.nodes.contains(&far) {
                    continue;
                }
                let key = (graph.fact_ref(edge_idx).display_text(), far);
                if seen.insert(key) {
                    candidates.push((edge_idx, far));
                }
            }
            if candidates.is_empty() {
                if !beam.edges.is_empty() {
                    finished.push(beam.clone());
                }
                continue;
            }
            candidates.sort_by(|&(ea, fa), &(eb, fb)| {
                edge_scores[eb].total_cmp(&edge_scores[ea]).then_with(|| {
                    let da = graph.fact_ref(ea).display_text();
                    let db = graph.fact_ref(eb).display_text();
                    da.cmp(&db).then_with(|| {
                        graph.entity_label(fa).cmp(graph.entity_label(fb))
                    })
                })
            });
            for &(edge_idx, far) in candidates.iter().take(width) {
                let mut next = beam.clone();
                next.nodes.push(far);
                next.edges.push(edge_idx);
                next.score_sum += edge_scores[edge_idx];
                extended.push(next);
            }
        }
        if extended.is_empty() {
            beams.clear();
            break;
        }
        extended.sort_by(|a, b| {
            b.mean_score()
                .total_cmp(&a.mean_score())
                .then_with(|| a.display(graph).cmp(&b.display(graph)))
        });
        extended.truncate(width);
        beams = extended;
    }
    finished.extend(beams.into_iter().filter(|b| !b.edges.is_empty()));

    finished.sort_by(|a, b| {
        b.mean_score()
            .total_cmp(&a.mean_score())
            .then_with(|| a.display(graph).cmp(&b.display(graph)))
    });
    let mut items = Vec::new();
    let mut scores = Vec::new();
    let mut seen = BTreeSet::new();
    for beam in finished {
        let display = beam.display(graph);
        if !seen.insert(display.clone()) {
            continue;
        }
        items.push(display);
        scores.push(beam.mean_score());
        if items.len() == k_paths {
            break;
        }
    }
    Ok(GraphEvidence { items, scores, kind: EvidenceKind::TogPaths })
}

/// Which retriever an evaluation or scoring run uses, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RetrieverSpec {
    Subgraph {
        #[serde(default = "default_hops")]
        hops: usize,
        #[serde(default)]
        anchor_mode: AnchorMode,
    },
    DenseTriples {
        #[serde(default = "default_top_k")]
        k: usize,
    },
    Tog {
        #[serde(default = "default_tog_width")]
        width: usize,
        #[serde(default = "default_tog_width")]
        depth: usize,
        #[serde(default = "default_top_k")]
        k_paths: usize,
    },
    TextPpr {
        #[serde(default = "default_text_top_n")]
        top_n: usize,
        #[serde(default)]
        ppr: PprConfig,
    },
}

fn default_hops() -> usize {
    1
}

fn default_top_k() -> usize {
    10
}

fn default_tog_width() -> usize {
    3
}

fn default_text_top_n() -> usize {
    5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::kg::{build_graph, Passage, Triple};

    fn t(s: &str, r: &str, o: &str) -> Triple {
        Triple::new(s, r, o).unwrap()
    }

    fn graph_of(triples: &[Triple]) -> KnowledgeGraph {
        let passages = vec![Passage::new("p1", "text")];
        build_graph(&[("p1".into(), triples.to_vec())], &passages).unwrap()
    }

    #[test]
    fn string_match_requires_word_boundaries() {
        let graph = graph_of(&[t("goose", "is a", "bird"), t("go", "r", "x")]);
        let anchors = string_match_anchors(&graph, "where does the goose go?");
        // "go" matches the word "go", but must not match inside "goose".
        assert_eq!(anchors, vec!["go".to_string(), "goose".to_string()]);
        let anchors = string_match_anchors(&graph, "gooseberry pie");
        assert!(anchors.is_empty());
    }

    #[test]
    fn subgraph_finds_case_study_edge() {
        let graph = graph_of(&[
            t("The Goose Woman", "directed by", "Clarence Brown"),
            t("Clarence Brown", "was a", "American film director"),
        ]);
        let evidence = subgraph_retrieve(
            &graph,
            "who directed The Goose Woman",
            1,
            &AnchorStrategy::StringMatch,
        )
        .unwrap();
        assert_eq!(evidence.items, vec!["(the goose woman, directed by, clarence brown)"]);
        assert_eq!(evidence.scores, vec![1.0]);
    }

    #[test]
    fn subgraph_no_anchor_is_empty() {
        let graph = graph_of(&[t("a", "r", "b")]);
        let evidence =
            subgraph_retrieve(&graph, "unrelated question", 3, &AnchorStrategy::StringMatch)
                .unwrap();
        assert!(evidence.is_empty());
    }

    #[test]
    fn subgraph_hops_cover_chain_and_are_monotone() {
        let graph = graph_of(&[t("a", "r1", "b"), t("b", "r2", "c"), t("c", "r3", "d")]);
        let one = subgraph_retrieve(&graph, "what about a?", 1, &AnchorStrategy::StringMatch)
            .unwrap();
        let three = subgraph_retrieve(&graph, "what about a?", 3, &AnchorStrategy::StringMatch)
            .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(three.len(), 3);
        assert!(one.items.iter().all(|i| three.items.contains(i)));
    }

    #[test]
    fn dense_returns_all_when_fewer_than_k() {
        let graph = graph_of(&[
            t("a", "r", "b"),
            t("c", "r", "d"),
            t("e", "r", "f"),
            t("g", "r", "h"),
        ]);
        let evidence =
            dense_triple_retrieve(&graph, "anything", 10, &HashEmbedder::default()).unwrap();
        assert_eq!(evidence.len(), 4);
        for pair in evidence.scores.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn llm_ner_anchor_path() {
        let graph = graph_of(&[t("The Goose Woman", "directed by", "Clarence Brown")]);
        let gateway =
            crate::gateway::ScriptedGateway::new().script_raw_default(r#"["The Goose Woman"]"#);
        let anchors = llm_ner_anchors(&graph, "who directed it?", &gateway).unwrap();
        assert_eq!(anchors, vec!["the goose woman".to_string()]);
        let evidence = subgraph_retrieve(
            &graph,
            "who directed it?",
            1,
            &AnchorStrategy::LlmNer(&gateway),
        )
        .unwrap();
        assert_eq!(evidence.len(), 1);
    }

    #[test]
    fn beam_star_depth_one_keeps_top_width_edges() {
        let graph = graph_of(&[
            t("hub", "r1", "a"),
            t("hub", "r2", "b"),
            t("hub", "r3", "c"),
            t("hub", "r4", "d"),
            t("hub", "r5", "e"),
        ]);
        let evidence =
            tog_beam_search(&graph, "tell me about hub", 3, 1, 10, &HashEmbedder::default())
                .unwrap();
        assert_eq!(evidence.len(), 3);
        // Items must be the 3 highest-scoring of the 5 edges.
        let dense =
            dense_triple_retrieve(&graph, "tell me about hub", 3, &HashEmbedder::default())
                .unwrap();
        assert_eq!(evidence.items, dense.items);
    }

    #[test]
    fn beam_recovers_case_study_path() {
        let graph = graph_of(&[
            t("Los Pagares de Mendieta", "directed by", "Leopoldo Torres Rios"),
            t("Leopoldo Torres Rios", "father of", "Leopoldo Torre Nilsson"),
            t("Leopoldo Torres Rios", "born on", "27 December 1899"),
        ]);
        let evidence = tog_beam_search(
            &graph,
            "Who is the child of the director of film Los Pagares De Mendieta?",
            3,
            3,
            10,
            &HashEmbedder::default(),
        )
        .unwrap();
        let full_path = "(los pagares de mendieta, directed by, leopoldo torres rios) → \
                         (leopoldo torres rios, father of, leopoldo torre nilsson)";
        assert!(
            evidence.items.iter().any(|i| i == full_path),
            "expected path among {:?}",
            evidence.items
        );
    }

    #[test]
    fn beam_paths_never_revisit_nodes() {
        // Triangle plus a tail; any returned path must be simple.
        let graph = graph_of(&[
            t("a", "r", "b"),
            t("b", "r", "c"),
            t("c", "r", "a"),
            t("c", "r", "d"),
        ]);
        let evidence =
            tog_beam_search(&graph, "a question about a", 3, 3, 10, &HashEmbedder::default())
                .unwrap();
        for item in &evidence.items {
            let hops = item.split(" → ").count();
            assert!(hops <= 3);
        }
        assert!(!evidence.is_empty());
    }

    #[test]
    fn beam_without_anchors_is_empty() {
        let graph = graph_of(&[t("a", "r", "b")]);
        let evidence =
            tog_beam_search(&graph, "nothing matches", 3, 3, 10, &HashEmbedder::default())
                .unwrap();
        assert!(evidence.is_empty());
    }
}
