//! Reproduce the behavioral signatures of the known failure modes with
//! scripted policies over a synthetic world, and print them side by side
//! in the run-report table.
//!
//!     cargo run --example failure_mode_signatures

use std::collections::BTreeMap;

use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::policy::{simulate_run, ScriptedPolicy};
use kgym::reward::{Component, Rung};
use kgym::stats::RunReport;

fn main() {
    let (g, golds) = fixtures::synthetic_world(100);
    // the memory table answers a third of the questions from "memory"
    let memory: BTreeMap<String, String> = golds
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 3 == 0)
        .map(|(_, r)| (r.qid.clone(), r.answers[0].clone()))
        .collect();
    let goldset = GoldSet::new(golds).unwrap();

    let policies = [
        ScriptedPolicy::MemoryAnswer {
            answers: memory.clone(),
            fallback: "unknown".into(),
        },
        ScriptedPolicy::RitualSingleCall {
            answers: memory,
            fallback: "unknown".into(),
        },
        ScriptedPolicy::FormatDrift {
            severity: 1.0,
            template_seed: 0,
        },
        ScriptedPolicy::QuoteAndStop,
        ScriptedPolicy::GoldPath { template_seed: 0 },
    ];

    let mut reports: Vec<(String, RunReport)> = Vec::new();
    for policy in &policies {
        let outcome = simulate_run(policy, &goldset, &g, Rung::SelfV).unwrap();
        reports.push((policy.name().to_string(), outcome.report));
    }
    let rows: Vec<(&str, &RunReport)> =
        reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    print!("{}", RunReport::table(&rows));

    println!("\nretrieval-component means (the gold-free proxy each run earns):");
    for (name, report) in &reports {
        let retrv = report.mean_breakdown.component(Component::Retrv).unwrap_or(0.0);
        println!("  {name:<20} mean retrv = {retrv:.3}");
    }
    println!(
        "\nreadings: the ritual run holds Tools/Q at 1.0 with zero grounded answers;\n\
         quote-and-stop drives the retrieval proxy to its maximum while EM stays low;\n\
         the drifted run loses its calls entirely; only gold-path couples EM and CvT."
    );
}
