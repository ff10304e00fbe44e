//! Task-aware rewards that drive policy optimization.
//!
//! Two reward shapes exist, matching the two roles a graph can play:
//!
//! - knowledge carrying: a binary judge decides whether the gold answer is
//!   deducible from retrieved graph evidence;
//! - knowledge indexing: the fraction of gold passages recovered in the
//!   top-k of the graph's passage ranking.
//!
//! Both live in [0, 1] before the repetition penalty. A malformed judge
//! reply scores zero with a flag instead of raising; a single bad reply must
//! not abort a training batch.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::{ChatGateway, Decoding, GatewayError, PromptRequest, TemplateName};
use crate::kg::Triple;
use crate::ppr::PassageRanking;
use crate::retrieve::GraphEvidence;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("gold passage set is empty; the indexing reward divides by |gold|")]
    EmptyGold,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Shaping parameters applied on top of the raw task reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Weight of the linear repetition penalty term.
    pub lambda_rep: f64,
    /// Repetition ratio above which the reward is zeroed outright.
    pub rep_hard_cap: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { lambda_rep: 1.0, rep_hard_cap: 0.3 }
    }
}

/// A computed reward with its breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    /// Raw task reward in [0, 1], before any penalty.
    pub value: f64,
    /// Reward after the repetition penalty; never exceeds `value`.
    pub penalized_value: f64,
    /// Named component values (raw_reward, p_rep, flags as 0/1 markers).
    pub components: BTreeMap<String, f64>,
    /// Stable reference to the judge exchange that produced this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_transcript_ref: Option<String>,
}

impl RewardOutcome {
    /// A bare outcome carrying only the raw value, used when composing
    /// rewards computed elsewhere.
    pub fn from_value(value: f64) -> Self {
        let mut components = BTreeMap::new();
        components.insert("raw_reward".to_string(), value);
        Self { value, penalized_value: value, components, judge_transcript_ref: None }
    }

    fn with_flag(mut self, flag: &str) -> Self {
        self.components.insert(flag.to_string(), 1.0);
        self
    }
}

/// Interprets a judge reply. The judge is instructed to answer only
/// 'Yes'/'No'; surrounding quotes and punctuation are tolerated, anything
/// else is non-conforming.
fn parse_judge_verdict(text: &str) -> Option<bool> {
    let stripped: String =
        text.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    match stripped.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Binary deducibility reward decided by an external judge.
///
/// Empty evidence short-circuits to 0.0 without a judge call. Judge replies
/// that fail to parse score 0.0 and set `judge_format_error`; transport
/// failures propagate so the caller can distinguish environment breakage
/// from graph quality.
pub fn knowledge_carrying_reward(
    query: &str,
    gold_answer: &str,
    evidence: &GraphEvidence,
    gateway: &dyn ChatGateway,
) -> Result<RewardOutcome, RewardError> {
    if evidence.is_empty() {
        return Ok(RewardOutcome::from_value(0.0).with_flag("empty_evidence"));
    }
    let bindings: BTreeMap<String, String> = [
        ("triples string".to_string(), evidence.joined()),
        ("query".to_string(), query.to_string()),
        ("answer".to_string(), gold_answer.to_string()),
    ]
    .into();
    let request = PromptRequest::from_template(
        TemplateName::DeducibleJudge,
        bindings,
        Decoding { temperature: 0.0, max_tokens: 8, seed: None },
    )?;
    let response = gateway.complete(&request)?;
    let transcript_ref = {
        let mut hasher = Sha256::new();
        hasher.update(request.text.as_bytes());
        hasher.update([0]);
        hasher.update(response.text.as_bytes());
        hex::encode(&hasher.finalize()[..16])
    };
    let mut outcome = match parse_judge_verdict(&response.text) {
        Some(true) => RewardOutcome::from_value(1.0),
        Some(false) => RewardOutcome::from_value(0.0),
        None => RewardOutcome::from_value(0.0).with_flag("judge_format_error"),
    };
    outcome.components.insert("judge_calls".to_string(), 1.0);
    outcome.judge_transcript_ref = Some(transcript_ref);
    Ok(outcome)
}

/// Fraction of gold passages present among the retrieved top-k: the exact
/// recall formula shared with evaluation, kept in one place so training and
/// eval can never drift apart.
pub fn recall_fraction<'a, I>(retrieved_top_k: I, gold: &BTreeSet<String>) -> f64
where
    I: IntoIterator<Item = &'a str>,
{
    if gold.is_empty() {
        return 0.0;
    }
    let hits = retrieved_top_k.into_iter().filter(|id| gold.contains(*id)).count();
    hits as f64 / gold.len() as f64
}

/// Recall of gold passages in the ranking's top-k.
pub fn knowledge_indexing_reward(
    ranking: &PassageRanking,
    gold_passage_ids: &BTreeSet<String>,
    k: usize,
) -> Result<RewardOutcome, RewardError> {
    if gold_passage_ids.is_empty() {
        return Err(RewardError::EmptyGold);
    }
    let value = recall_fraction(ranking.top_ids(k), gold_passage_ids);
    Ok(RewardOutcome::from_value(value))
}

/// Fraction of duplicate triples in a generation, with duplicates decided on
/// the normalized (subject, relation, object) key. Returns `(p_rep,
/// unique_count)`; an empty generation has zero repetition.
pub fn repetition_penalty(triples: &[Triple]) -> (f64, usize) {
    if triples.is_empty() {
        return (0.0, 0);
    }
    let unique: BTreeSet<_> = triples.iter().map(Triple::normalized_key).collect();
    let total = triples.len();
    let p_rep = (total - unique.len()) as f64 / total as f64;
    (p_rep, unique.len())
}

/// Applies the repetition penalty: zero everything above the hard cap,
/// otherwise subtract `lambda_rep * p_rep` and floor at zero.
pub fn compose_reward(
    raw: RewardOutcome,
    p_rep: f64,
    lambda_rep: f64,
    hard_cap: f64,
) -> RewardOutcome {
    let mut outcome = raw;
    outcome.components.insert("p_rep".to_string(), p_rep);
    outcome.components.insert("lambda_rep".to_string(), lambda_rep);
    outcome.penalized_value = if p_rep > hard_cap {
        outcome.components.insert("rep_hard_capped".to_string(), 1.0);
        0.0
    } else {
        (outcome.value - lambda_rep * p_rep).max(0.0)
    };
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedGateway;
    use crate::retrieve::EvidenceKind;

    fn evidence(items: &[&str]) -> GraphEvidence {
        GraphEvidence {
            items: items.iter().map(|s| s.to_string()).collect(),
            scores: vec![1.0; items.len()],
            kind: EvidenceKind::Subgraph,
        }
    }

    fn gold(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn judge_yes_scores_one() {
        let gateway = ScriptedGateway::new().script_default(TemplateName::DeducibleJudge, "Yes");
        let outcome =
            knowledge_carrying_reward("q", "y", &evidence(&["(a, r, b)"]), &gateway).unwrap();
        assert_eq!(outcome.value, 1.0);
        assert!(outcome.judge_transcript_ref.is_some());
    }

    #[test]
    fn judge_no_with_trailing_period_scores_zero() {
        let gateway = ScriptedGateway::new().script_default(TemplateName::DeducibleJudge, "no.");
        let outcome =
            knowledge_carrying_reward("q", "y", &evidence(&["(a, r, b)"]), &gateway).unwrap();
        assert_eq!(outcome.value, 0.0);
        assert!(!outcome.components.contains_key("judge_format_error"));
    }

    #[test]
    fn empty_evidence_short_circuits_without_a_call() {
        let gateway = ScriptedGateway::new().script_default(TemplateName::DeducibleJudge, "Yes");
        let outcome = knowledge_carrying_reward(
            "q",
            "y",
            &GraphEvidence::empty(EvidenceKind::Subgraph),
            &gateway,
        )
        .unwrap();
        assert_eq!(outcome.value, 0.0);
        assert_eq!(gateway.call_count(), 0, "judge must not be called on empty evidence");
    }

    #[test]
    fn malformed_judge_output_flags_instead_of_raising() {
        let gateway = ScriptedGateway::new()
            .script_default(TemplateName::DeducibleJudge, "It depends on the context.");
        let outcome =
            knowledge_carrying_reward("q", "y", &evidence(&["(a, r, b)"]), &gateway).unwrap();
        assert_eq!(outcome.value, 0.0);
        assert_eq!(outcome.components["judge_format_error"], 1.0);
    }

    fn ranking(ids: &[&str]) -> PassageRanking {
        PassageRanking {
            ranked: ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), 1.0 - i as f64 * 0.1))
                .collect(),
        }
    }

    #[test]
    fn indexing_reward_matches_formula() {
        let outcome =
            knowledge_indexing_reward(&ranking(&["p1", "p4"]), &gold(&["p1", "p2"]), 2).unwrap();
        assert_eq!(outcome.value, 0.5);
        let outcome =
            knowledge_indexing_reward(&ranking(&["p1"]), &gold(&["p1"]), 1).unwrap();
        assert_eq!(outcome.value, 1.0);
        let outcome = knowledge_indexing_reward(
            &ranking(&["p2", "p4", "p3"]),
            &gold(&["p1", "p2", "p3"]),
            3,
        )
        .unwrap();
        assert!((outcome.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn indexing_reward_rejects_empty_gold() {
        assert!(matches!(
            knowledge_indexing_reward(&ranking(&["p1"]), &gold(&[]), 1),
            Err(RewardError::EmptyGold)
        ));
    }

    fn t(s: &str, r: &str, o: &str) -> Triple {
        Triple::new(s, r, o).unwrap()
    }

    #[test]
    fn repetition_penalty_formula() {
        let mut triples = vec![];
        for i in 0..7 {
            triples.push(t(&format!("s{i}"), "r", "o"));
        }
        triples.push(t("s0", "r", "o"));
        triples.push(t("s1", "r", "o"));
        triples.push(t("s2", "r", "o"));
        let (p_rep, unique) = repetition_penalty(&triples);
        assert_eq!(p_rep, 0.3);
        assert_eq!(unique, 7);

        let (p_rep, _) = repetition_penalty(&[t("a", "r", "b"), t("c", "r", "d")]);
        assert_eq!(p_rep, 0.0);

        let copies = vec![t("a", "r", "b"); 4];
        let (p_rep, unique) = repetition_penalty(&copies);
        assert_eq!(p_rep, 0.75);
        assert_eq!(unique, 1);

        assert_eq!(repetition_penalty(&[]), (0.0, 0));
    }

    #[test]
    fn repetition_uniqueness_is_on_normalized_key() {
        let (p_rep, unique) =
            repetition_penalty(&[t("Clarence  Brown", "Directed", "X"), t("clarence brown", "directed", "x")]);
        assert_eq!(unique, 1);
        assert_eq!(p_rep, 0.5);
    }

    #[test]
    fn compose_hard_cap_and_floor() {
        let capped = compose_reward(RewardOutcome::from_value(1.0), 0.31, 1.0, 0.3);
        assert_eq!(capped.penalized_value, 0.0);
        assert_eq!(capped.components["rep_hard_capped"], 1.0);

        let at_boundary = compose_reward(RewardOutcome::from_value(1.0), 0.3, 1.0, 0.3);
        assert!((at_boundary.penalized_value - 0.7).abs() < 1e-12, "0.3 is not above the cap");

        let shaped = compose_reward(RewardOutcome::from_value(1.0), 0.2, 1.0, 0.3);
        assert!((shaped.penalized_value - 0.8).abs() < 1e-12);

        let floored = compose_reward(RewardOutcome::from_value(0.1), 0.2, 1.0, 0.3);
        assert_eq!(floored.penalized_value, 0.0);
    }

    #[test]
    fn verdict_parsing_tolerates_wrapping() {
        assert_eq!(parse_judge_verdict(" Yes"), Some(true));
        assert_eq!(parse_judge_verdict("'No'"), Some(false));
        assert_eq!(parse_judge_verdict("NO!"), Some(false));
        assert_eq!(parse_judge_verdict("Yes, clearly"), None);
        assert_eq!(parse_judge_verdict(""), None);
    }
}
