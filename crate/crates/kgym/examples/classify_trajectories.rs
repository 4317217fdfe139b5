//! Seven-category classification and the error denominators.
//!
//!     cargo run --example classify_trajectories

use kgym::classify::{classify, Category};
use kgym::diagnostics::error_denominators;
use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::reward::Rung;
use kgym::stats::score_run;
use kgym::trajectory::parse_transcript;

fn main() {
    let g = fixtures::g0();
    let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
    let gold = golds.require("g0-religion").unwrap();

    let cases = [
        ("no call, right answer", "<answer>judaism</answer>"),
        (
            "grounded answer",
            "<search>get_tail_entities(m.01, people.person.religion)</search><tool_response>judaism</tool_response><answer>judaism</answer>",
        ),
        (
            "ritual call, memory answer",
            "<search>get_tail_relations(m.01)</search><tool_response>people.person.religion</tool_response><answer>judaism</answer>",
        ),
        ("no call, wrong answer", "<answer>islam</answer>"),
        ("malformed call", "<search>lookup(m.01)</search><answer>islam</answer>"),
        (
            "all responses empty",
            "<search>get_tail_entities(m.77, people.person.religion)</search><tool_response></tool_response><answer>islam</answer>",
        ),
        (
            "responses touch the chain, answer still wrong",
            "<search>get_tail_entities(m.01, people.person.religion)</search><tool_response>judaism</tool_response><answer>islam</answer>",
        ),
    ];

    let mut trajs = Vec::new();
    for (label, text) in cases {
        let t = parse_transcript(text).with_qid("g0-religion");
        println!("{:<42} -> {}", label, classify(&t, gold, &g));
        trajs.push(t);
    }

    let (report, records) = score_run(&trajs, &golds, &g, Rung::Stepwise).unwrap();
    println!("\ncategory histogram over the {} cases:", report.n);
    for (category, count) in &report.category_histogram {
        if *count > 0 {
            println!("  {category:<20} {count}");
        }
    }
    let strict_errors = records.iter().filter(|r| !r.strict_em).count();
    let d = error_denominators(&report, strict_errors).unwrap();
    println!(
        "\ndenominators: D3 (normalized errors) = {}, D2 (retrieval-dependent) = {}, D1 (strict) = {}",
        d.d3_normalized_errors, d.d2_retrieval_dependent, d.d1_strict_em_errors
    );
    assert_eq!(
        report.cvt_count,
        report.category_histogram[&Category::CorrectViaTool]
    );
}
