//! Deterministic desk-scale fixtures: a small hand-built graph (`g0`) and a
//! parameterized synthetic world generator. Used by the test suites and the
//! runnable examples; handy as smoke-test data for the CLI too.

use crate::gold::GoldRecord;
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};

fn e(id: &str) -> EntityId {
    EntityId::new(id).expect("fixture entity id")
}

fn r(name: &str) -> RelationId {
    RelationId::new(name).expect("fixture relation id")
}

fn t(head: &str, rel: &str, tail: &str) -> Triple {
    Triple::new(e(head), r(rel), e(tail))
}

/// The seven-triple fixture graph used across the test suites.
pub fn g0_triples() -> Vec<Triple> {
    vec![
        t("m.01", "people.person.religion", "m.02"),
        t("m.01", "people.person.place_of_birth", "m.03"),
        t("m.02", "religion.religion.founders", "m.06"),
        t("m.04", "film.actor.film", "m.05"),
        t("m.05", "film.film.directed_by", "m.07"),
        t("m.04", "people.person.nationality", "m.08"),
        t("m.09", "film.film.directed_by", "m.07"),
    ]
}

pub fn g0_aliases() -> Vec<(EntityId, String)> {
    [
        ("m.01", "ovadia yosef"),
        ("m.02", "judaism"),
        ("m.03", "jerusalem"),
        ("m.04", "audrey hepburn"),
        ("m.05", "roman holiday"),
        ("m.06", "abraham"),
        ("m.07", "william wyler"),
        ("m.08", "united kingdom"),
        ("m.09", "ben-hur"),
    ]
    .into_iter()
    .map(|(id, label)| (e(id), label.to_string()))
    .collect()
}

pub fn g0() -> KnowledgeGraph {
    KnowledgeGraph::from_triples(g0_triples(), g0_aliases())
}

/// Gold records for the two questions answerable on `g0`: a one-hop
/// religion lookup and a two-hop director lookup.
pub fn g0_gold_records() -> Vec<GoldRecord> {
    vec![
        GoldRecord {
            qid: "g0-religion".into(),
            question: "what religion does ovadia yosef lead?".into(),
            answers: vec!["judaism".into()],
            chain: vec![t("m.01", "people.person.religion", "m.02")],
            seeds: vec![e("m.01")],
        },
        GoldRecord {
            qid: "g0-director".into(),
            question: "who directed the 1953 film starring audrey hepburn?".into(),
            answers: vec!["william wyler".into()],
            chain: vec![
                t("m.04", "film.actor.film", "m.05"),
                t("m.05", "film.film.directed_by", "m.07"),
            ],
            seeds: vec![e("m.04")],
        },
    ]
}

/// `g0` merged with a 20-question synthetic world: a slightly larger graph
/// for wire-protocol and load testing.
pub fn g0_extended() -> KnowledgeGraph {
    let (_, golds) = synthetic_world(20);
    let mut triples = g0_triples();
    let mut aliases = g0_aliases();
    for gold in &golds {
        triples.extend(gold.chain.iter().cloned());
    }
    // decoy edges and labels from the synthetic world
    for i in 0..20 {
        let seed = format!("m.w{i}.s");
        let decoy = format!("m.w{i}.d");
        triples.push(t(&seed, RELATION_POOL[(i + 3) % 4], &decoy));
        aliases.push((e(&seed), format!("subject {i}")));
        aliases.push((e(&decoy), format!("decoy {i}")));
        aliases.push((e(&format!("m.w{i}.a")), format!("target {i}")));
        if i % 2 == 1 {
            aliases.push((e(&format!("m.w{i}.m")), format!("bridge {i}")));
        }
    }
    KnowledgeGraph::from_triples(triples, aliases)
}

const RELATION_POOL: [&str; 4] = [
    "kb.link.alpha",
    "kb.link.beta",
    "kb.link.delta",
    "kb.link.gamma",
];

/// Builds a fully answerable synthetic world of `n` questions, alternating
/// one-hop (even index) and two-hop (odd index) chains. Every seed entity
/// carries the gold relation plus one decoy relation, so relation listings
/// are never empty and entity fetches down the gold chain always succeed.
/// Construction is pure arithmetic: the same `n` always yields the same
/// world.
pub fn synthetic_world(n: usize) -> (KnowledgeGraph, Vec<GoldRecord>) {
    let mut triples = Vec::new();
    let mut aliases = Vec::new();
    let mut golds = Vec::with_capacity(n);
    for i in 0..n {
        let seed = format!("m.w{i}.s");
        let answer = format!("m.w{i}.a");
        let decoy = format!("m.w{i}.d");
        let gold_rel = RELATION_POOL[i % 4];
        let decoy_rel = RELATION_POOL[(i + 3) % 4];
        aliases.push((e(&seed), format!("subject {i}")));
        aliases.push((e(&answer), format!("target {i}")));
        aliases.push((e(&decoy), format!("decoy {i}")));
        triples.push(t(&seed, decoy_rel, &decoy));

        let chain = if i % 2 == 0 {
            triples.push(t(&seed, gold_rel, &answer));
            vec![t(&seed, gold_rel, &answer)]
        } else {
            let mid = format!("m.w{i}.m");
            let second_rel = RELATION_POOL[(i + 1) % 4];
            aliases.push((e(&mid), format!("bridge {i}")));
            triples.push(t(&seed, gold_rel, &mid));
            triples.push(t(&mid, second_rel, &answer));
            vec![t(&seed, gold_rel, &mid), t(&mid, second_rel, &answer)]
        };
        golds.push(GoldRecord {
            qid: format!("w{i}"),
            question: format!("what does subject {i} lead to?"),
            answers: vec![format!("target {i}")],
            chain,
            seeds: vec![e(&seed)],
        });
    }
    (KnowledgeGraph::from_triples(triples, aliases), golds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_world_is_well_formed() {
        let (g, golds) = synthetic_world(12);
        g.check_invariants().unwrap();
        assert_eq!(golds.len(), 12);
        for gold in &golds {
            // every hop is executable on the graph
            for hop in &gold.chain {
                let tails = g.tail_entities(hop.head.as_str(), hop.relation.as_str());
                assert!(tails.contains(&hop.tail), "missing hop for {}", gold.qid);
            }
            // every seed lists at least one relation
            assert!(!g.tail_relations(gold.seeds[0].as_str()).is_empty());
        }
    }

    #[test]
    fn synthetic_world_is_deterministic() {
        let (g1, golds1) = synthetic_world(8);
        let (g2, golds2) = synthetic_world(8);
        assert_eq!(g1.triple_count(), g2.triple_count());
        assert_eq!(
            serde_json::to_string(&golds1).unwrap(),
            serde_json::to_string(&golds2).unwrap()
        );
    }
}
