//! Edit-distance bucketing of first calls, with the random-relation null
//! model for enrichment.
//!
//!     cargo run --example edit_distance_buckets

use kgym::diagnostics::{
    bucket_histogram, bucketize, enrichment_ratio, levenshtein, relation_typo_null_rate,
    BucketLabel, NullWeighting,
};
use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::trajectory::parse_transcript;

fn main() {
    println!(
        "levenshtein(people.person.religion, people.person.religions) = {}",
        levenshtein("people.person.religion", "people.person.religions")
    );

    let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
    let gold = golds.require("g0-religion").unwrap();

    let cases = [
        (
            "one-edit relation typo",
            "<search>get_tail_entities(m.01, people.person.religions)</search><answer>x</answer>",
        ),
        (
            "right entity, unrelated relation",
            "<search>get_tail_entities(m.01, film.actor.film)</search><answer>x</answer>",
        ),
        (
            "wrong entity, exact relation",
            "<search>get_tail_entities(m.09, people.person.religion)</search><answer>x</answer>",
        ),
        ("no calls at all", "<answer>x</answer>"),
    ];
    let mut trajs = Vec::new();
    for (label, text) in cases {
        let t = parse_transcript(text).with_qid("g0-religion");
        println!("{:<36} -> {}", label, bucketize(&t, gold).name());
        trajs.push(t);
    }

    let hist = bucket_histogram(trajs.iter().map(|t| (t, gold)));
    println!("\nbucket histogram: {:?}", hist);

    // null model: how often would a random relation from the vocabulary
    // land one edit away from the gold chain?
    let (g, golds) = fixtures::synthetic_world(12);
    let goldset = GoldSet::new(golds).unwrap();
    let gold = goldset.require("w0").unwrap();
    let null = relation_typo_null_rate(&g, gold, NullWeighting::Uniform);
    let observed = hist[&BucketLabel::RelationTypoLeq1] as f64 / trajs.len() as f64;
    println!("\nsynthetic-world null typo rate (uniform):   {null:.4}");
    println!(
        "frequency-weighted null:                    {:.4}",
        relation_typo_null_rate(&g, gold, NullWeighting::Frequency)
    );
    match enrichment_ratio(observed, null) {
        Some(ratio) => println!("enrichment over null: {ratio:.1}x"),
        None => println!("enrichment over null: undefined (null rate is zero)"),
    }
}
