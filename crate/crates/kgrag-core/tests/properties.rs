//! Property tests for the structural and numerical invariants.

use std::collections::{BTreeMap, BTreeSet};

use proptest::collection::vec;
use proptest::prelude::*;

use kgrag_core::embed::{cosine, top_k_similar, EmbeddingProvider, EmbeddingVector, HashEmbedder};
use kgrag_core::grpo::group_advantages;
use kgrag_core::kg::{build_graph, khop_neighborhood, parse_triples, Passage, Triple};
use kgrag_core::ppr::{personalized_pagerank, NodeId, PprConfig};
use kgrag_core::reward::{compose_reward, recall_fraction, RewardOutcome};

fn entity_label() -> impl Strategy<Value = String> {
    (0u8..8).prop_map(|i| format!("e{i}"))
}

fn triple() -> impl Strategy<Value = Triple> {
    (entity_label(), 0u8..3, entity_label())
        .prop_map(|(s, r, o)| Triple::new(s, format!("r{r}"), o).unwrap())
}

fn graph_input() -> impl Strategy<Value = Vec<(String, Vec<Triple>)>> {
    vec(vec(triple(), 0..8), 1..4).prop_map(|per_passage| {
        per_passage
            .into_iter()
            .enumerate()
            .map(|(i, triples)| (format!("p{i}"), triples))
            .collect()
    })
}

fn passages_for(input: &[(String, Vec<Triple>)]) -> Vec<Passage> {
    input.iter().map(|(id, _)| Passage::new(id.clone(), format!("text {id}"))).collect()
}

proptest! {
    /// Graph invariants hold after any build; node/edge sets are
    /// permutation-invariant in input order.
    #[test]
    fn graph_invariants_and_permutation_invariance(input in graph_input()) {
        let passages = passages_for(&input);
        let graph = build_graph(&input, &passages).unwrap();
        graph.check_invariants().unwrap();

        let mut reversed: Vec<(String, Vec<Triple>)> = input.clone();
        reversed.reverse();
        for (_, triples) in &mut reversed {
            triples.reverse();
        }
        let mut reversed_passages = passages.clone();
        reversed_passages.reverse();
        let permuted = build_graph(&reversed, &reversed_passages).unwrap();
        prop_assert!(graph.same_content(&permuted));
    }

    /// khop(k) ⊆ khop(k+1).
    #[test]
    fn khop_monotone_in_k(input in graph_input(), k in 1usize..4, anchor in entity_label()) {
        let passages = passages_for(&input);
        let graph = build_graph(&input, &passages).unwrap();
        let smaller = khop_neighborhood(&graph, &[anchor.clone()], k);
        let larger = khop_neighborhood(&graph, &[anchor], k + 1);
        let larger_set: BTreeSet<_> = larger.iter().collect();
        prop_assert!(smaller.iter().all(|t| larger_set.contains(t)));
    }

    /// Serializing parsed triples back to the prompt's JSON shape and
    /// re-parsing is the identity.
    #[test]
    fn parse_serialize_round_trip(triples in vec(triple(), 0..10)) {
        let json = serde_json::to_string(&triples).unwrap();
        let parsed = parse_triples(&json).unwrap();
        prop_assert_eq!(parsed.triples, triples);
        prop_assert_eq!(parsed.malformed, 0);
    }

    /// top_k_similar agrees with a full sort of all candidates.
    #[test]
    fn top_k_agrees_with_full_sort(
        seeds in vec(0u32..1000, 1..20),
        query_seed in 0u32..1000,
        k in 1usize..8,
    ) {
        let embedder = HashEmbedder::new(16);
        let query = embedder.embed_one(&format!("query {query_seed}")).unwrap();
        let candidates: Vec<(String, EmbeddingVector)> = seeds
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (format!("c{i:02}"), embedder.embed_one(&format!("cand {s}")).unwrap())
            })
            .collect();
        let got = top_k_similar(&query, &candidates, k).unwrap();
        let mut full: Vec<(String, f64)> = candidates
            .iter()
            .map(|(id, v)| (id.clone(), cosine(&query, v).unwrap()))
            .collect();
        full.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        full.truncate(k);
        prop_assert_eq!(got, full);
    }

    /// Advantages are invariant under positive affine reward transforms.
    #[test]
    fn advantages_affine_invariant(
        rewards in vec(0.0f64..1.0, 2..8),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let base = group_advantages(&rewards, 1e-9).unwrap();
        let transformed: Vec<f64> = rewards.iter().map(|r| scale * r + shift).collect();
        let shifted = group_advantages(&transformed, 1e-9).unwrap();
        // Skip near-degenerate groups where the floor decides differently.
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
            / rewards.len() as f64)
            .sqrt();
        prop_assume!(std > 1e-6);
        for (a, b) in base.iter().zip(&shifted) {
            prop_assert!((a - b).abs() < 1e-6, "affine transform changed advantages");
        }
    }

    /// compose_reward is monotone non-increasing in p_rep and never
    /// negative.
    #[test]
    fn compose_monotone_in_p_rep(
        raw in 0.0f64..1.0,
        p1 in 0.0f64..1.0,
        p2 in 0.0f64..1.0,
        lambda in 0.0f64..2.0,
    ) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = compose_reward(RewardOutcome::from_value(raw), lo, lambda, 0.3);
        let b = compose_reward(RewardOutcome::from_value(raw), hi, lambda, 0.3);
        prop_assert!(a.penalized_value >= b.penalized_value);
        prop_assert!(b.penalized_value >= 0.0);
        prop_assert!(a.penalized_value <= a.value);
    }

    /// Adding a gold passage to the retrieved top-k never decreases R_I.
    #[test]
    fn indexing_reward_monotone(
        retrieved in vec(0usize..12, 0..8),
        gold in vec(0usize..12, 1..5),
    ) {
        let gold: BTreeSet<String> = gold.into_iter().map(|i| format!("p{i}")).collect();
        let mut ids: Vec<String> = Vec::new();
        for i in retrieved {
            let id = format!("p{i}");
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        let base = recall_fraction(ids.iter().map(String::as_str), &gold);
        // Append every gold passage not yet retrieved, one at a time; each
        // addition may only improve recall.
        let mut widened = ids.clone();
        let mut previous = base;
        for extra in gold.iter().filter(|g| !ids.contains(*g)) {
            widened.push(extra.clone());
            let improved = recall_fraction(widened.iter().map(String::as_str), &gold);
            prop_assert!(improved >= previous);
            previous = improved;
        }
    }

    /// PPR output is a probability distribution and is invariant under node
    /// relabeling.
    #[test]
    fn ppr_distribution_and_relabeling(input in graph_input(), seed_pick in 0usize..64) {
        let passages = passages_for(&input);
        let graph = build_graph(&input, &passages).unwrap();
        prop_assume!(graph.entity_count() > 0);
        let labels: Vec<String> = graph.entity_labels().map(str::to_string).collect();
        let seed = labels[seed_pick % labels.len()].clone();
        let personalization: BTreeMap<NodeId, f64> =
            [(NodeId::Entity(seed.clone()), 1.0)].into();
        let config = PprConfig::default();
        let scores = personalized_pagerank(&graph, &personalization, &config).unwrap();
        let total: f64 = scores.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
        prop_assert!(scores.values().all(|&v| v >= 0.0));

        // Relabel every entity with a prefixed name; scores must follow the
        // relabeling.
        let relabeled_input: Vec<(String, Vec<Triple>)> = input
            .iter()
            .map(|(p, triples)| {
                (
                    p.clone(),
                    triples
                        .iter()
                        .map(|t| {
                            Triple::new(
                                format!("zz {}", t.subject),
                                t.relation.clone(),
                                format!("zz {}", t.object),
                            )
                            .unwrap()
                        })
                        .collect(),
                )
            })
            .collect();
        let relabeled = build_graph(&relabeled_input, &passages).unwrap();
        let relabeled_personalization: BTreeMap<NodeId, f64> =
            [(NodeId::Entity(format!("zz {seed}")), 1.0)].into();
        let relabeled_scores =
            personalized_pagerank(&relabeled, &relabeled_personalization, &config).unwrap();
        for (node, value) in &scores {
            let twin = match node {
                NodeId::Entity(label) => NodeId::Entity(format!("zz {label}")),
                NodeId::Passage(id) => NodeId::Passage(id.clone()),
            };
            let other = relabeled_scores.get(&twin).copied().unwrap_or(f64::NAN);
            prop_assert!((value - other).abs() < 1e-9, "relabeling moved mass");
        }
    }

    /// Monotone seeding: shifting personalization mass toward an entity
    /// never decreases that entity's PPR score.
    #[test]
    fn ppr_monotone_seeding(input in graph_input(), pick in 0usize..64, boost in 0.1f64..5.0) {
        let passages = passages_for(&input);
        let graph = build_graph(&input, &passages).unwrap();
        prop_assume!(graph.entity_count() >= 2);
        let labels: Vec<String> = graph.entity_labels().map(str::to_string).collect();
        let target = labels[pick % labels.len()].clone();
        let uniform_mass = 1.0 / labels.len() as f64;
        let base_personalization: BTreeMap<NodeId, f64> = labels
            .iter()
            .map(|l| (NodeId::Entity(l.clone()), uniform_mass))
            .collect();
        let mut boosted = base_personalization.clone();
        *boosted.get_mut(&NodeId::Entity(target.clone())).unwrap() += boost;
        let total: f64 = boosted.values().sum();
        for value in boosted.values_mut() {
            *value /= total;
        }
        let config = PprConfig { tolerance: 1e-12, max_iterations: 300, ..Default::default() };
        let base = personalized_pagerank(&graph, &base_personalization, &config).unwrap();
        let more = personalized_pagerank(&graph, &boosted, &config).unwrap();
        let node = NodeId::Entity(target);
        prop_assert!(more[&node] >= base[&node] - 1e-9);
    }

    /// The mock embedder is pure and unit-norm for arbitrary text.
    #[test]
    fn mock_embedder_pure_and_normalized(text in ".{0,40}") {
        let a = HashEmbedder::new(24).embed_one(&text).unwrap();
        let b = HashEmbedder::new(24).embed_one(&text).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((a.l2_norm() - 1.0).abs() < 1e-9);
    }
}
