//! Acceptance suite: twelve gate criteria, one test each, every tolerance
//! pinned in code. Each test prints a single PASS line on success (run
//! with `--nocapture` to see them); a failure panics with the violation.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use kgym::classify::{classify, entity_in_answer, Category};
use kgym::diagnostics::{error_denominators, oracle_relation_replay, ExtractionStrategy};
use kgym::fixtures;
use kgym::gold::{GoldRecord, GoldSet};
use kgym::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use kgym::pipeline;
use kgym::policy::{
    gen_gold_trajectory, self_distill_filter, simulate_run, RejectReason,
    ScriptedPolicy,
};
use kgym::respond::DEFAULT_RESPONSE_CAP;
use kgym::reward::{self, Component, Rung};
use kgym::stats::{mcnemar_p, pass_at_k, score_run, spearman_rho, wilson_ci};
use kgym::text::normalize;
use kgym::trajectory::{parse_call, parse_transcript, ToolVerb, Trajectory, Turn};
use kgym::wire::{self, ToolRequest};

const EXACT: f64 = 1e-9;

fn pass(id: &str, what: &str) {
    println!("PASS {id}: {what}");
}

fn turn(think: Option<&str>, call: Option<&str>, lines: Option<&[&str]>) -> Turn {
    Turn {
        think: think.map(str::to_string),
        call: call.map(parse_call),
        response_lines: lines.map(|ls| ls.iter().map(|s| s.to_string()).collect()),
    }
}

fn traj(qid: &str, turns: Vec<Turn>, answer: Option<&str>) -> Trajectory {
    Trajectory {
        question_id: qid.into(),
        turns,
        final_answer_raw: answer.map(str::to_string),
        flags: Default::default(),
        raw_bytes: 0,
    }
    .finalize(&Default::default())
}

#[test]
fn c01_wilson_fixtures() {
    let start = Instant::now();
    let cases = [
        (133usize, 3.19, 4.45),
        (338, 8.65, 10.59),
        (205, 5.08, 6.63),
        (0, 0.00, 0.11),
    ];
    for (successes, lo, hi) in cases {
        let ci = wilson_ci(successes, 3531, 0.95).unwrap();
        let (got_lo, got_hi) = (ci.low * 100.0, ci.high * 100.0);
        assert!(
            (got_lo - lo).abs() <= 0.005 && (got_hi - hi).abs() <= 0.005,
            "wilson({successes}, 3531) -> [{got_lo:.4}, {got_hi:.4}], want [{lo}, {hi}]"
        );
    }
    assert!(start.elapsed() < Duration::from_secs(1), "runtime bound");
    pass("C1", "Wilson intervals reproduce the published rows at ±0.005 pp");
}

#[test]
fn c02_denominator_fixtures() {
    let start = Instant::now();
    // Synthetic run with the exact published category counts:
    // 205 correct-via-tool + 1203 correct-via-memory + 165 tool-misuse +
    // 818 kg-incomplete + 1140 wrong-answer = 3531.
    let (g, golds) = fixtures::synthetic_world(1);
    let gold = &golds[0]; // 1-hop: (m.w0.s, kb.link.alpha, m.w0.a), answer "target 0"
    let goldset = GoldSet::new(golds.clone()).unwrap();

    let cvt = gen_gold_trajectory(gold, &g, 0).unwrap();
    let cvm = traj(
        "w0",
        vec![turn(None, Some("get_tail_relations(m.w0.s)"), Some(&["kb.link.alpha"]))],
        Some("target 0"),
    );
    let misuse = traj("w0", vec![turn(None, Some("broken("), None)], Some("dunno"));
    let incomplete = traj(
        "w0",
        vec![turn(None, Some("get_tail_entities(m.nowhere, kb.link.alpha)"), Some(&[]))],
        Some("dunno"),
    );
    let wrong = traj(
        "w0",
        vec![turn(None, Some("get_tail_entities(m.w0.s, kb.link.alpha)"), Some(&["target 0"]))],
        Some("dunno"),
    );

    let mut run: Vec<Trajectory> = Vec::with_capacity(3531);
    run.extend(std::iter::repeat_with(|| cvt.clone()).take(205));
    run.extend(std::iter::repeat_with(|| cvm.clone()).take(1203));
    run.extend(std::iter::repeat_with(|| misuse.clone()).take(165));
    run.extend(std::iter::repeat_with(|| incomplete.clone()).take(818));
    run.extend(std::iter::repeat_with(|| wrong.clone()).take(1140));

    let (report, _) = score_run(&run, &goldset, &g, Rung::Toolverbs).unwrap();
    assert_eq!(report.category_histogram[&Category::ToolMisuse], 165);
    assert_eq!(report.category_histogram[&Category::KgIncomplete], 818);
    assert_eq!(report.category_histogram[&Category::WrongAnswer], 1140);

    let d = error_denominators(&report, 2119).unwrap();
    assert_eq!(d.d3_normalized_errors, 2123);
    assert_eq!(d.d2_retrieval_dependent, 1958);
    assert_eq!(d.d1_strict_em_errors, 2119);
    assert!(start.elapsed() < Duration::from_secs(1), "runtime bound");
    pass("C2", "error denominators come out (2123, 1958, 2119) on the fixture histogram");
}

#[test]
fn c03_reward_unit_suite() {
    let golds = |items: &[&str]| -> Vec<String> { items.iter().map(|s| s.to_string()).collect() };
    let mut checks = 0usize;
    let mut ok = |name: &str, got: f64, want: f64| {
        assert!(
            (got - want).abs() < EXACT,
            "{name}: got {got}, want {want}"
        );
        checks += 1;
    };

    // em
    ok("em identity", reward::exact_match("judaism", &golds(&["judaism"])).unwrap(), 1.0);
    ok("em wrong", reward::exact_match("roman holiday", &golds(&["william wyler"])).unwrap(), 0.0);
    ok("em substring is not match", reward::exact_match("wyler", &golds(&["william wyler"])).unwrap(), 0.0);
    // f1
    ok("f1 exact", reward::token_f1("william wyler", &golds(&["william wyler"])).unwrap(), 1.0);
    ok("f1 partial", reward::token_f1("william wyler", &golds(&["wyler"])).unwrap(), 2.0 / 3.0);
    ok("f1 empty answer", reward::token_f1("", &golds(&["judaism"])).unwrap(), 0.0);
    // out
    ok("out perfect", reward::outcome("judaism", &golds(&["judaism"])).unwrap(), 1.0);
    ok("out mixed", reward::outcome("william wyler", &golds(&["wyler"])).unwrap(), 1.0 / 3.0);
    ok("out empty", reward::outcome("", &golds(&["x"])).unwrap(), 0.0);
    // ans
    ok("ans exact", reward::lenient_answer("judaism", &golds(&["judaism"])).unwrap(), 1.0);
    ok("ans lenient", reward::lenient_answer("wyler", &golds(&["william wyler"])).unwrap(), 0.25 + 1.0 / 3.0);
    ok("ans disjoint", reward::lenient_answer("zzz", &golds(&["judaism"])).unwrap(), 0.0);

    // trajectory components
    let three_calls = traj(
        "t",
        vec![
            turn(None, Some("get_tail_relations(m.01)"), Some(&["r"])),
            turn(None, Some("bogus(m.01)"), None),
            turn(None, Some("get_head_relations(m.02)"), Some(&[])),
        ],
        Some("x"),
    );
    ok("valid fraction", reward::valid_call_fraction(&three_calls), 2.0 / 3.0);
    ok("valid no calls", reward::valid_call_fraction(&traj("t", vec![], Some("x"))), 0.0);
    ok("tool_usage fraction", reward::nonempty_response_fraction(&three_calls), 1.0 / 3.0);

    let gold_rec = GoldRecord {
        qid: "t".into(),
        question: String::new(),
        answers: vec!["judaism".into()],
        chain: vec![Triple::new(
            EntityId::new("m.01").unwrap(),
            RelationId::new("people.person.religion").unwrap(),
            EntityId::new("m.02").unwrap(),
        )],
        seeds: vec![],
    };
    let on_chain = traj(
        "t",
        vec![turn(None, Some("get_tail_entities(m.01, people.person.religion)"), Some(&["judaism"]))],
        Some("judaism"),
    );
    ok("path hit", reward::gold_path_hit(&on_chain, &gold_rec), 1.0);
    let listing_only = traj("t", vec![turn(None, Some("get_tail_relations(m.01)"), Some(&["r"]))], Some("x"));
    ok("path needs relation arg", reward::gold_path_hit(&listing_only, &gold_rec), 0.0);

    let coh = traj(
        "t",
        vec![turn(Some("plan is fetch tails for m01 then stop"), Some("fetch tails for m01"), None)],
        Some("x"),
    );
    ok("coh embedded call", reward::think_call_coherence(&coh), 2.0 / 3.0);
    ok("coh no think", reward::think_call_coherence(&listing_only), 0.0);

    let two_verbs = traj(
        "t",
        vec![
            turn(None, Some("get_tail_relations(m.01)"), Some(&["r"])),
            turn(None, Some("get_tail_entities(m.01, r.x)"), Some(&["x"])),
        ],
        Some("x"),
    );
    ok("tool_type two verbs", reward::verb_coverage(&two_verbs), 0.5);

    let retrv_half = traj(
        "t",
        vec![
            turn(None, Some("get_tail_entities(m.01, r.x)"), Some(&["judaism"])),
            turn(None, Some("get_tail_entities(m.01, r.y)"), Some(&[])),
        ],
        Some("judaism"),
    );
    ok("retrv one of two", reward::retrieval_contribution(&retrv_half), 0.5);
    let quote_stop = traj(
        "t",
        vec![turn(None, Some("get_tail_entities(m.04, film.actor.film)"), Some(&["roman holiday"]))],
        Some("roman holiday"),
    );
    ok("retrv quote-and-stop max", reward::retrieval_contribution(&quote_stop), 1.0);
    ok("retrv no calls", reward::retrieval_contribution(&traj("t", vec![], Some("x"))), 0.0);

    // composites
    let binary_gold = GoldRecord {
        qid: "t".into(),
        question: String::new(),
        answers: vec!["judaism".into()],
        chain: vec![],
        seeds: vec![],
    };
    let perfect = traj("t", vec![], Some("judaism"));
    ok("R-binary perfect", reward::score(Rung::Binary, &perfect, &binary_gold).unwrap().total, 1.0);
    ok(
        "R-binary-SR shares the function",
        reward::score(Rung::BinarySr, &perfect, &binary_gold).unwrap().total,
        1.0,
    );
    ok(
        "R-stepwise (1,1,1,0) -> 0.75",
        reward::score(Rung::Stepwise, &on_chain, &gold_rec).unwrap().total,
        0.75,
    );
    let wyler_gold = GoldRecord {
        qid: "t".into(),
        question: String::new(),
        answers: vec!["william wyler".into()],
        chain: vec![Triple::new(
            EntityId::new("m.04").unwrap(),
            RelationId::new("film.actor.film").unwrap(),
            EntityId::new("m.05").unwrap(),
        )],
        seeds: vec![],
    };
    let selfv = reward::score(Rung::SelfV, &quote_stop, &wyler_gold).unwrap();
    ok("R-selfV quote-and-stop ans", selfv.component(Component::Ans).unwrap(), 0.0);
    ok("R-selfV quote-and-stop tool_type", selfv.component(Component::ToolType).unwrap(), 0.25);
    ok("R-selfV quote-and-stop retrv", selfv.component(Component::Retrv).unwrap(), 1.0);
    ok("R-selfV quote-and-stop total", selfv.total, 0.375);
    let toolverbs = reward::score(Rung::Toolverbs, &two_verbs, &binary_gold).unwrap();
    ok(
        "R-toolverbs recomputable",
        toolverbs.total,
        0.25 * toolverbs.component(Component::Out).unwrap()
            + 0.5 * toolverbs.component(Component::ToolType).unwrap()
            + 0.25 * toolverbs.component(Component::ToolUsage).unwrap(),
    );
    ok(
        "R-toolverbs-KL shares the function",
        reward::score(Rung::ToolverbsKl, &two_verbs, &binary_gold).unwrap().total,
        toolverbs.total,
    );

    assert!(checks >= 18, "only {checks} reward checks ran");
    pass("C3", &format!("{checks}/{checks} reward unit checks exact to 1e-9"));
}

#[test]
fn c04_kg_symmetry_property() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let entities: Vec<String> = (0..20).map(|i| format!("m.e{i}")).collect();
    let relations: Vec<String> = (0..6).map(|i| format!("kb.rel.r{i}")).collect();
    let mut probes = 0usize;
    for _ in 0..100 {
        let n_triples = rng.gen_range(5..40);
        let triples: Vec<Triple> = (0..n_triples)
            .map(|_| {
                Triple::new(
                    EntityId::new(entities.choose(&mut rng).unwrap().clone()).unwrap(),
                    RelationId::new(relations.choose(&mut rng).unwrap().clone()).unwrap(),
                    EntityId::new(entities.choose(&mut rng).unwrap().clone()).unwrap(),
                )
            })
            .collect();
        let g = KnowledgeGraph::from_triples(triples, []);
        g.check_invariants().unwrap();
        for _ in 0..12 {
            let e1 = entities.choose(&mut rng).unwrap();
            let e2 = entities.choose(&mut rng).unwrap();
            let r = relations.choose(&mut rng).unwrap();
            // direction symmetry
            let fwd = g.tail_entities(e1, r).iter().any(|x| x.as_str() == e2);
            let rev = g.head_entities(e2, r).iter().any(|x| x.as_str() == e1);
            assert_eq!(fwd, rev, "symmetry violated at ({e1}, {r}, {e2})");
            // relation consistency, both directions
            let listed = g.tail_relations(e1).iter().any(|x| x.as_str() == r);
            assert_eq!(listed, !g.tail_entities(e1, r).is_empty());
            let listed = g.head_relations(e1).iter().any(|x| x.as_str() == r);
            assert_eq!(listed, !g.head_entities(e1, r).is_empty());
            probes += 1;
        }
    }
    assert!(probes >= 1000, "only {probes} probes");
    assert!(start.elapsed() < Duration::from_secs(10), "runtime bound");
    pass("C4", "direction symmetry and relation consistency hold on 1200 random probes");
}

#[test]
fn c05_classifier_totality_and_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (g, golds) = fixtures::synthetic_world(4);
    let goldset = GoldSet::new(golds).unwrap();
    let fragments = [
        "<think>", "</think>", "<search>", "</search>", "<tool_response>",
        "</tool_response>", "<answer>", "</answer>", "get_tail_relations(m.w0.s)",
        "get_tail_entities(m.w0.s, kb.link.alpha)", "broken(", "target 0",
        "subject 1", "plain text", "\n", "kb.link.alpha",
    ];
    let n = 10_000;
    let mut histogram: BTreeMap<Category, usize> = BTreeMap::new();
    let mut cvt_independent = 0usize;
    for i in 0..n {
        let len = rng.gen_range(0..12);
        let text: String = (0..len)
            .map(|_| *fragments.choose(&mut rng).unwrap())
            .collect();
        let qid = format!("w{}", i % 4);
        let traj = parse_transcript(&text).with_qid(&qid);
        let gold = goldset.require(&qid).unwrap();
        let category = classify(&traj, gold, &g);
        *histogram.entry(category).or_default() += 1;

        let norm_golds = gold.normalized_answers();
        let em = reward::exact_match(&traj.normalized_answer(), &norm_golds).unwrap() == 1.0;
        if em && traj.call_count() > 0 && entity_in_answer(&traj) {
            cvt_independent += 1;
        }
    }
    let total: usize = histogram.values().sum();
    assert_eq!(total, n, "histogram must partition the corpus");
    assert_eq!(
        histogram.get(&Category::CorrectViaTool).copied().unwrap_or(0),
        cvt_independent,
        "CvT count must equal the correct-via-tool bucket"
    );
    pass("C5", "10000 fuzzed trajectories each land in exactly one category");
}

#[test]
fn c06_mode2_ritual_signature() {
    let (g, golds) = fixtures::synthetic_world(100);
    // memory table answers a third of the questions correctly
    let answers: BTreeMap<String, String> = golds
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 3 == 0)
        .map(|(_, gold)| (gold.qid.clone(), gold.answers[0].clone()))
        .collect();
    let goldset = GoldSet::new(golds).unwrap();
    let policy = ScriptedPolicy::RitualSingleCall {
        answers,
        fallback: "unknown".into(),
    };
    let outcome = simulate_run(&policy, &goldset, &g, Rung::Stepwise).unwrap();

    assert_eq!(outcome.report.tools_per_q, 1.0, "Tools/Q must be exactly 1");
    for traj in &outcome.trajectories {
        let verbs: Vec<ToolVerb> = traj.parsed_calls().map(|a| a.verb).collect();
        assert_eq!(verbs, [ToolVerb::GetTailRelations], "every call is a relation listing");
    }
    assert_eq!(outcome.report.cvt_count, 0, "no answer is grounded in a response");
    assert!(outcome.report.em_rate > 0.3, "memory answers keep EM well above zero");
    pass("C6", "ritual policy shows Tools/Q=1.0, 100% get_tail_relations, CvT=0");
}

#[test]
fn c07_mode4_component_signature() {
    let (g, golds) = fixtures::synthetic_world(100);
    let goldset = GoldSet::new(golds.clone()).unwrap();

    // brute-force expectation: label of the first-listed entity under the
    // first-listed relation, compared against the gold answers
    let mut expected_hits = 0usize;
    for gold in &golds {
        let seed = gold.seeds[0].as_str();
        let first_entity_label = g
            .tail_relations(seed)
            .first()
            .and_then(|rel| g.tail_entities(seed, rel.as_str()).first().cloned())
            .map(|e| g.label_of(e.as_str()).to_string());
        if let Some(label) = first_entity_label {
            if gold
                .normalized_answers()
                .contains(&normalize(&label))
            {
                expected_hits += 1;
            }
        }
    }
    let expected_em = expected_hits as f64 / golds.len() as f64;
    assert!(expected_em > 0.0 && expected_em < 1.0, "fixture must be non-degenerate");

    let quote = simulate_run(&ScriptedPolicy::QuoteAndStop, &goldset, &g, Rung::SelfV).unwrap();
    assert_eq!(quote.report.tools_per_q, 1.0);
    let mean_retrv = quote.report.mean_breakdown.component(Component::Retrv).unwrap();
    assert!((mean_retrv - 1.0).abs() < EXACT, "mean r_retrv = {mean_retrv}");
    assert!(
        (quote.report.em_rate - expected_em).abs() < EXACT,
        "em {} vs brute force {expected_em}",
        quote.report.em_rate
    );

    let gold_path = simulate_run(
        &ScriptedPolicy::GoldPath { template_seed: 0 },
        &goldset,
        &g,
        Rung::SelfV,
    )
    .unwrap();
    assert_eq!(gold_path.report.em_rate, 1.0);
    let gp_retrv = gold_path.report.mean_breakdown.component(Component::Retrv).unwrap();
    // relation-listing calls return relation names, which never appear in
    // the answer, so at least one call per question is non-productive
    let has_nonproductive_listing = gold_path.trajectories.iter().any(|t| {
        t.call_turns().any(|(turn, call)| {
            call.args.as_ref().is_some_and(|a| a.relation.is_none())
                && !kgym::reward::call_is_productive(turn, &t.normalized_answer())
        })
    });
    assert!(has_nonproductive_listing);
    assert!(gp_retrv < 1.0, "gold-path mean r_retrv = {gp_retrv}");
    pass(
        "C7",
        "quote-and-stop maxes r_retrv at EM=brute-force rate; gold-path hits EM=1 with r_retrv<1",
    );
}

#[test]
fn c08_oracle_replay() {
    let (g, golds) = fixtures::synthetic_world(50);

    // every trajectory queries a wrong relation at each hop
    let mut reachable = 0usize;
    let mut em_after = 0usize;
    for gold in &golds {
        let turns: Vec<Turn> = gold
            .chain
            .iter()
            .map(|hop| {
                turn(
                    None,
                    Some(&format!("get_tail_entities({}, kb.link.wrong)", hop.head)),
                    Some(&[]),
                )
            })
            .collect();
        let t = traj(&gold.qid, turns, Some("dunno"));
        let r = oracle_relation_replay(&t, gold, &g, ExtractionStrategy::QuoteIfPresent).unwrap();
        reachable += r.reachable as usize;
        assert_eq!(r.em_delta, 1, "EM must flip 0 -> 1 for {}", gold.qid);
        em_after += 1;
    }
    assert_eq!(reachable, 50, "reachability must flip to 100%");
    assert_eq!(em_after, 50, "quote-if-present EM must reach 100%");

    // trajectories already on gold relations see exactly zero delta
    for gold in &golds {
        let t = gen_gold_trajectory(gold, &g, 0).unwrap();
        let r = oracle_relation_replay(&t, gold, &g, ExtractionStrategy::QuoteIfPresent).unwrap();
        assert_eq!(r.em_delta, 0, "gold-relation replay must be a no-op for {}", gold.qid);
    }
    pass("C8", "gold-relation injection flips 50/50 wrong-relation queries; no-op on gold queries");
}

#[test]
fn c09_self_distill_filter() {
    let (g, golds) = fixtures::synthetic_world(100);
    let goldset = GoldSet::new(golds).unwrap();
    let trajs: Vec<Trajectory> = goldset
        .records()
        .iter()
        .map(|gold| gen_gold_trajectory(gold, &g, 0).unwrap())
        .collect();
    let clean = self_distill_filter(trajs.clone(), &goldset).unwrap();
    assert_eq!(clean.yield_fraction, 1.0);

    let mut corrupted = trajs;
    for t in corrupted.iter_mut().take(25) {
        t.final_answer_raw = Some("corrupted".into());
    }
    let result = self_distill_filter(corrupted, &goldset).unwrap();
    assert_eq!(result.yield_fraction, 0.75, "yield must drop to exactly 0.75");
    assert_eq!(result.rejected.len(), 25);
    assert!(result
        .rejected
        .iter()
        .all(|(_, reason)| *reason == RejectReason::EmFail));
    pass("C9", "filter yields 1.00 on gold paths, exactly 0.75 after corrupting 25%");
}

#[test]
fn c10_statistics_properties() {
    // pass@k nondecreasing in k over seeded random inputs
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let counts: Vec<(usize, usize)> = (0..rng.gen_range(1..10))
            .map(|_| {
                let n = rng.gen_range(1..16);
                (rng.gen_range(0..=n), n)
            })
            .collect();
        let max_k = counts.iter().map(|&(_, n)| n).min().unwrap();
        let mut prev = 0.0;
        for k in 1..=max_k {
            let v = pass_at_k(&counts, k).unwrap();
            assert!(v + EXACT >= prev, "pass@{k} decreased: {v} < {prev}");
            prev = v;
        }
    }

    let p = mcnemar_p(10, 0);
    assert!((p - 0.00195).abs() <= 1e-5, "mcnemar(10,0) = {p}");

    let xs = [1.0, 2.0, 3.0, 4.0];
    assert!((spearman_rho(&xs, &xs).unwrap() - 1.0).abs() < EXACT);
    assert!((spearman_rho(&xs, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < EXACT);
    assert!((spearman_rho(&xs, &[1.0, 2.0, 4.0, 3.0]).unwrap() - 0.8).abs() < EXACT);
    pass("C10", "pass@k monotone, McNemar and Spearman fixtures exact");
}

#[test]
fn c11_wire_local_equivalence() {
    let start = Instant::now();
    let g = Arc::new(fixtures::g0_extended());
    let server = wire::serve_framed(g.clone(), "127.0.0.1:0", DEFAULT_RESPONSE_CAP).unwrap();
    let mut client = wire::WireClient::connect(server.addr()).unwrap();

    let mut entities: Vec<String> = (0..20).flat_map(|i| {
        vec![format!("m.w{i}.s"), format!("m.w{i}.a"), format!("m.w{i}.d")]
    }).collect();
    entities.extend(["m.01", "m.04", "m.07", "m.99", "m.nowhere"].map(String::from));
    let relations = [
        "kb.link.alpha",
        "kb.link.beta",
        "kb.link.delta",
        "kb.link.gamma",
        "people.person.religion",
        "no.such.relation",
    ];
    let verbs = [
        "get_tail_relations",
        "get_head_relations",
        "get_tail_entities",
        "get_head_entities",
        "frobnicate",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for i in 0..1000 {
        let verb = verbs.choose(&mut rng).unwrap().to_string();
        let entity = entities.choose(&mut rng).unwrap().clone();
        // sometimes deliberately wrong arity
        let wants_relation = matches!(verb.as_str(), "get_tail_entities" | "get_head_entities");
        let relation = if rng.gen_bool(if wants_relation { 0.9 } else { 0.1 }) {
            Some(relations.choose(&mut rng).unwrap().to_string())
        } else {
            None
        };
        let req = ToolRequest {
            verb,
            entity,
            relation,
            request_id: Some(format!("r{i}")),
        };
        let over_wire = client.request(&req).unwrap();
        let local = wire::handle_request(&g, &req, DEFAULT_RESPONSE_CAP);
        assert_eq!(over_wire, local, "request {i} diverged: {req:?}");
        assert_eq!(
            serde_json::to_vec(&over_wire).unwrap(),
            serde_json::to_vec(&local).unwrap(),
            "request {i} serialization diverged"
        );
    }
    server.shutdown();
    assert!(start.elapsed() < Duration::from_secs(5), "runtime bound");
    pass("C11", "1000 random wire requests byte-identical to in-process calls");
}

#[test]
fn c12_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.tsv");
    let alias_path = dir.path().join("aliases.tsv");
    let gold_path = dir.path().join("gold.jsonl");
    let traj_path = dir.path().join("traj.jsonl");

    let mut graph_rows = String::new();
    for t in fixtures::g0_triples() {
        graph_rows.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
    }
    std::fs::write(&graph_path, graph_rows).unwrap();
    let mut alias_rows = String::new();
    for (e, label) in fixtures::g0_aliases() {
        alias_rows.push_str(&format!("{e}\t{label}\n"));
    }
    std::fs::write(&alias_path, alias_rows).unwrap();
    let gold_lines: Vec<String> = fixtures::g0_gold_records()
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    std::fs::write(&gold_path, gold_lines.join("\n") + "\n").unwrap();

    let g = fixtures::g0();
    let goldset = GoldSet::new(fixtures::g0_gold_records()).unwrap();
    let mut corpus = pipeline::gen_sft_corpus(&goldset, &g, 0).unwrap();
    // add an adversarial line so determinism is tested beyond clean input
    corpus.push(pipeline::TranscriptRecord {
        qid: "g0-religion".into(),
        transcript: "<search>broken(</search>no answer tag".into(),
    });
    pipeline::write_jsonl(&traj_path, &corpus).unwrap();

    let run = |out: &str, report: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.path().join(out);
        let report = dir.path().join(report);
        let code = kgym::cli::main_with_args([
            "kgym",
            "score",
            "--graph",
            graph_path.to_str().unwrap(),
            "--aliases",
            alias_path.to_str().unwrap(),
            "--gold",
            gold_path.to_str().unwrap(),
            "--traj",
            traj_path.to_str().unwrap(),
            "--reward",
            "R-selfV",
            "--out",
            out.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        (std::fs::read(out).unwrap(), std::fs::read(report).unwrap())
    };
    let (out1, rep1) = run("scored1.jsonl", "report1.json");
    let (out2, rep2) = run("scored2.jsonl", "report2.json");
    assert_eq!(out1, out2, "scored output must be byte-identical");
    assert_eq!(rep1, rep2, "report must be byte-identical");
    pass("C12", "score produces byte-identical outputs across runs");
}
