//! The corpus pipeline: generate rule-based gold-path trajectories, corrupt
//! some of them, and run the self-distillation filter.
//!
//!     cargo run --example distill_pipeline

use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::policy::{gen_gold_trajectory, self_distill_filter, ScriptedPolicy, run_policy};
use kgym::trajectory::{render, Trajectory};

fn main() {
    let (g, golds) = fixtures::synthetic_world(16);
    let goldset = GoldSet::new(golds).unwrap();

    // generate the gold-path corpus
    let mut corpus: Vec<Trajectory> = goldset
        .records()
        .iter()
        .map(|gold| gen_gold_trajectory(gold, &g, 0).unwrap())
        .collect();
    println!("generated {} gold-path trajectories", corpus.len());
    println!("first transcript:\n{}\n", render(&corpus[0]));

    // a clean corpus passes the filter whole
    let clean = self_distill_filter(corpus.clone(), &goldset).unwrap();
    println!("clean corpus yield: {:.2}", clean.yield_fraction);

    // corrupt a quarter of the answers and add two degenerate rollouts
    for t in corpus.iter_mut().take(4) {
        t.final_answer_raw = Some("not the answer".into());
    }
    let quote = run_policy(&ScriptedPolicy::QuoteAndStop, &goldset.records()[1], &g).unwrap();
    corpus.push(quote);
    let memory = run_policy(
        &ScriptedPolicy::MemoryAnswer {
            answers: [(
                goldset.records()[2].qid.clone(),
                goldset.records()[2].answers[0].clone(),
            )]
            .into(),
            fallback: "unknown".into(),
        },
        &goldset.records()[2],
        &g,
    )
    .unwrap();
    corpus.push(memory);

    let result = self_distill_filter(corpus, &goldset).unwrap();
    println!(
        "after corruption: kept {}/{} (yield {:.3})",
        result.kept.len(),
        result.kept.len() + result.rejected.len(),
        result.yield_fraction
    );
    for (t, reason) in &result.rejected {
        println!("  rejected {:<4} {:?}", t.question_id, reason);
    }
}
