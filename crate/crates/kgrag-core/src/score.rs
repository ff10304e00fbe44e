//! Scoring a group of constructor generations for one query.
//!
//! This is the environment side of the training loop: parse each
//! generation's per-passage outputs into triples, build a graph over the
//! request's passages, run the mode's frozen retriever, and compute the
//! task reward plus repetition penalty. Group advantages over the penalized
//! rewards come back as a convenience so the trainer boundary sits exactly
//! at the reward signal.
//!
//! The same function backs `POST /v1/score` and the CLI's offline replay, so
//! the two surfaces cannot diverge.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingProvider;
use crate::gateway::{ChatGateway, GatewayError, TranscriptRecorder};
use crate::grpo::group_advantages;
use crate::kg::{build_graph, parse_triples, KgError, KnowledgeGraph, Passage, Triple};
use crate::ppr::{rank_passages, PprConfig};
use crate::retrieve::{subgraph_retrieve, AnchorStrategy};
use crate::reward::{
    compose_reward, knowledge_carrying_reward, knowledge_indexing_reward, repetition_penalty,
    RewardConfig, RewardError, RewardOutcome,
};

#[derive(Debug, Error)]
pub enum ScoreError {
    /// Request shape is wrong for the chosen mode (HTTP 422).
    #[error("invalid request: {0}")]
    Invalid(String),
    /// The upstream judge endpoint failed after retries (HTTP 502).
    #[error("upstream judge failure: {0}")]
    Upstream(#[from] GatewayError),
}

/// Which task reward scores the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    KnowledgeCarrying,
    KnowledgeIndexing,
}

/// Per-request overrides of the server's scoring defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreParams {
    /// Subgraph hops for carrying mode (default 3).
    pub hops: Option<usize>,
    pub lambda_rep: Option<f64>,
    pub rep_hard_cap: Option<f64>,
    pub ppr: Option<PprConfig>,
}

/// One query's scoring request. Each generation maps passage id to the raw
/// constructor output produced for that passage; passages with no entry
/// contributed no triples. The per-passage shape is what lets fact edges
/// carry provenance, which indexing mode depends on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub query: String,
    #[serde(default)]
    pub gold_answer: String,
    #[serde(default)]
    pub gold_passage_ids: Vec<String>,
    pub passages: Vec<Passage>,
    pub generations: Vec<BTreeMap<String, String>>,
    pub mode: RewardMode,
    #[serde(default)]
    pub params: ScoreParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationScore {
    pub reward: f64,
    pub penalized_reward: f64,
    pub p_rep: f64,
    pub parse_malformed_count: usize,
    pub evidence_size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_transcript_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub per_generation: Vec<GenerationScore>,
    /// Group-relative advantages over penalized rewards; present when G >= 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advantages: Option<Vec<f64>>,
    pub timing_ms: BTreeMap<String, u64>,
}

impl ScoreResponse {
    /// Copy with zeroed timings, for byte-level comparisons across surfaces.
    pub fn without_timings(&self) -> ScoreResponse {
        let mut clone = self.clone();
        for value in clone.timing_ms.values_mut() {
            *value = 0;
        }
        clone
    }
}

/// Scoring collaborators and defaults owned by the caller.
pub struct ScoreContext<'a> {
    pub gateway: &'a dyn ChatGateway,
    pub embedder: &'a dyn EmbeddingProvider,
    pub reward: RewardConfig,
    pub ppr: PprConfig,
    /// Subgraph hops used by carrying mode unless the request overrides it.
    pub carrying_hops: usize,
    pub grpo_std_floor: f64,
}

impl ScoreContext<'_> {
    fn effective_hops(&self, request: &ScoreRequest) -> usize {
        request.params.hops.unwrap_or(self.carrying_hops)
    }

    fn effective_reward(&self, request: &ScoreRequest) -> RewardConfig {
        RewardConfig {
            lambda_rep: request.params.lambda_rep.unwrap_or(self.reward.lambda_rep),
            rep_hard_cap: request.params.rep_hard_cap.unwrap_or(self.reward.rep_hard_cap),
        }
    }

    fn effective_ppr(&self, request: &ScoreRequest) -> PprConfig {
        request.params.ppr.unwrap_or(self.ppr)
    }
}

fn validate(request: &ScoreRequest) -> Result<(), ScoreError> {
    if request.generations.is_empty() {
        return Err(ScoreError::Invalid("at least one generation is required".into()));
    }
    if request.passages.is_empty() {
        return Err(ScoreError::Invalid("at least one passage is required".into()));
    }
    let ids: BTreeSet<&str> = request.passages.iter().map(|p| p.id.as_str()).collect();
    if ids.len() != request.passages.len() {
        return Err(ScoreError::Invalid("duplicate passage ids".into()));
    }
    for (i, generation) in request.generations.iter().enumerate() {
        for key in generation.keys() {
            if !ids.contains(key.as_str()) {
                return Err(ScoreError::Invalid(format!(
                    "generation {i} references unknown passage `{key}`"
                )));
            }
        }
    }
    if request.mode == RewardMode::KnowledgeIndexing {
        if request.gold_passage_ids.is_empty() {
            return Err(ScoreError::Invalid(
                "knowledge_indexing mode requires gold_passage_ids".into(),
            ));
        }
        for gold in &request.gold_passage_ids {
            if !ids.contains(gold.as_str()) {
                return Err(ScoreError::Invalid(format!(
                    "gold passage `{gold}` is not among the request passages"
                )));
            }
        }
    }
    Ok(())
}

struct ParsedGeneration {
    per_passage: Vec<(String, Vec<Triple>)>,
    all_triples: Vec<Triple>,
    malformed: usize,
    flags: Vec<String>,
}

fn parse_generation(generation: &BTreeMap<String, String>) -> ParsedGeneration {
    let mut parsed = ParsedGeneration {
        per_passage: Vec::new(),
        all_triples: Vec::new(),
        malformed: 0,
        flags: Vec::new(),
    };
    for (passage_id, raw) in generation {
        match parse_triples(raw) {
            Ok(result) => {
                parsed.malformed += result.malformed;
                parsed.all_triples.extend(result.triples.iter().cloned());
                parsed.per_passage.push((passage_id.clone(), result.triples));
            }
            Err(KgError::NoJsonArray) => {
                parsed.flags.push(format!("parse_error:{passage_id}"));
            }
            Err(other) => {
                parsed.flags.push(format!("parse_error:{passage_id}:{other}"));
            }
        }
    }
    parsed
}

fn score_generation(
    request: &ScoreRequest,
    ctx: &ScoreContext<'_>,
    generation: &BTreeMap<String, String>,
) -> Result<GenerationScore, ScoreError> {
    let mut parsed = parse_generation(generation);
    let graph = match build_graph(&parsed.per_passage, &request.passages) {
        Ok(graph) => graph,
        Err(e) => {
            // Validation rules out reference errors; anything else still
            // scores zero rather than aborting the group.
            parsed.flags.push(format!("graph_error:{e}"));
            KnowledgeGraph::default()
        }
    };
    let (p_rep, _unique) = repetition_penalty(&parsed.all_triples);
    let (raw_outcome, evidence_size) = score_reward(request, ctx, &graph, &mut parsed.flags)?;
    let reward_cfg = ctx.effective_reward(request);
    let composed = compose_reward(
        raw_outcome,
        p_rep,
        reward_cfg.lambda_rep,
        reward_cfg.rep_hard_cap,
    );
    for (name, value) in &composed.components {
        // Carry reward-side diagnostics (judge format errors etc.) into the
        // response flags.
        if *value == 1.0 && (name == "judge_format_error" || name == "empty_evidence") {
            parsed.flags.push(name.clone());
        }
    }
    Ok(GenerationScore {
        reward: composed.value,
        penalized_reward: composed.penalized_value,
        p_rep,
        parse_malformed_count: parsed.malformed,
        evidence_size,
        flags: parsed.flags,
        judge_transcript_ref: composed.judge_transcript_ref,
    })
}

fn score_reward(
    request: &ScoreRequest,
    ctx: &ScoreContext<'_>,
    graph: &KnowledgeGraph,
    flags: &mut Vec<String>,
) -> Result<(RewardOutcome, usize), ScoreError> {
    match request.mode {
        RewardMode::KnowledgeCarrying => {
            let hops = ctx.effective_hops(request);
            let evidence =
                subgraph_retrieve(graph, &request.query, hops, &AnchorStrategy::StringMatch)
                    .expect("string-match retrieval cannot fail");
            let recorder = TranscriptRecorder::new(ctx.gateway);
            let outcome = knowledge_carrying_reward(
                &request.query,
                &request.gold_answer,
                &evidence,
                &recorder,
            )
            .map_err(|e| match e {
                RewardError::Gateway(g) => ScoreError::Upstream(g),
                RewardError::EmptyGold => ScoreError::Invalid(e.to_string()),
            })?;
            Ok((outcome, evidence.len()))
        }
        RewardMode::KnowledgeIndexing => {
            let gold: BTreeSet<String> = request.gold_passage_ids.iter().cloned().collect();
            // Training convention: retrieve as many passages as there are
            // gold ones.
            let top_n = gold.len();
            let ppr = ctx.effective_ppr(request);
            let ranking = match rank_passages(graph, &request.query, top_n, &ppr, ctx.embedder)
            {
                Ok(ranking) => ranking,
                Err(e) => {
                    flags.push(format!("ppr_error:{e}"));
                    crate::ppr::PassageRanking { ranked: Vec::new() }
                }
            };
            let outcome = knowledge_indexing_reward(&ranking, &gold, top_n)
                .map_err(|e| ScoreError::Invalid(e.to_string()))?;
            Ok((outcome, ranking.len()))
        }
    }
}

/// Scores every generation in the request. Stateless: the same request and
/// scripted gateway produce the same response, timings aside.
pub fn score_group(
    request: &ScoreRequest,
    ctx: &ScoreContext<'_>,
) -> Result<ScoreResponse, ScoreError> {
    let started = Instant::now();
    validate(request)?;
    let per_generation: Vec<GenerationScore> = request
        .generations
        .par_iter()
        .map(|generation| score_generation(request, ctx, generation))
        .collect::<Result<_, _>>()?;
    let advantages = if per_generation.len() >= 2 {
        let rewards: Vec<f64> = per_generation.iter().map(|g| g.penalized_reward).collect();
        Some(
            group_advantages(&rewards, ctx.grpo_std_floor)
                .expect("two or more finite rewards"),
        )
    } else {
        None
    };
    let mut timing_ms = BTreeMap::new();
    timing_ms.insert("total".to_string(), started.elapsed().as_millis() as u64);
    Ok(ScoreResponse { per_generation, advantages, timing_ms })
}
