//! Gold-relation injection: re-run trajectories with the ground-truth
//! relation substituted into every entity fetch, keeping the entity
//! arguments, to localize whether relation selection gates correctness.
//!
//!     cargo run --example oracle_replay

use kgym::diagnostics::{oracle_relation_replay, ExtractionStrategy};
use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::trajectory::parse_transcript;

fn main() {
    let g = fixtures::g0();
    let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
    let gold = golds.require("g0-religion").unwrap();

    // the agent asked for the wrong relation and got nothing back
    let wrong = parse_transcript(
        "<search>get_tail_entities(m.01, people.person.nationality)</search>\
         <tool_response></tool_response>\
         <answer>unknown</answer>",
    )
    .with_qid("g0-religion");

    let r = oracle_relation_replay(&wrong, gold, &g, ExtractionStrategy::QuoteIfPresent).unwrap();
    println!("wrong-relation trajectory:");
    println!("  original answer: {:?}", wrong.final_answer_raw);
    println!("  injected call:   {}", r.trajectory.turns[0].call.as_ref().unwrap().raw_text);
    println!("  replayed lines:  {:?}", r.trajectory.turns[0].response_lines);
    println!("  reachable: {}, replayed answer: {:?}, EM delta: {:+}", r.reachable, r.replayed_answer, r.em_delta);

    // an agent already on the gold relation sees no change
    let right = parse_transcript(
        "<search>get_tail_entities(m.01, people.person.religion)</search>\
         <tool_response>judaism</tool_response>\
         <answer>judaism</answer>",
    )
    .with_qid("g0-religion");
    let r = oracle_relation_replay(&right, gold, &g, ExtractionStrategy::QuoteIfPresent).unwrap();
    println!("\ngold-relation trajectory: EM delta: {:+} (no-op)", r.em_delta);

    // aggregate view over a synthetic world where every query is wrong
    let (g, golds) = fixtures::synthetic_world(20);
    let goldset = GoldSet::new(golds).unwrap();
    let mut flips = 0;
    for gold in goldset.records() {
        let turns: String = gold
            .chain
            .iter()
            .map(|hop| {
                format!(
                    "<search>get_tail_entities({}, kb.link.wrong)</search><tool_response></tool_response>",
                    hop.head
                )
            })
            .collect();
        let t = parse_transcript(&format!("{turns}<answer>dunno</answer>")).with_qid(&gold.qid);
        let r = oracle_relation_replay(&t, gold, &g, ExtractionStrategy::QuoteIfPresent).unwrap();
        flips += (r.em_delta > 0) as usize;
    }
    println!(
        "\nsynthetic world: gold-relation injection flips {}/{} wrong-relation trajectories to correct",
        flips,
        goldset.len()
    );
}
