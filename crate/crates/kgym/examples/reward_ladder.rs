//! Score one trajectory under every reward rung and print the component
//! decomposition side by side.
//!
//!     cargo run --example reward_ladder

use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::policy::{gen_gold_trajectory, run_policy, ScriptedPolicy};
use kgym::reward::{score, Rung};

fn main() {
    let g = fixtures::g0();
    let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
    let gold = golds.require("g0-director").unwrap();

    let healthy = gen_gold_trajectory(gold, &g, 0).unwrap();
    let degenerate = run_policy(&ScriptedPolicy::QuoteAndStop, gold, &g).unwrap();

    for (label, traj) in [("grounded multi-call", &healthy), ("quote-and-stop", &degenerate)] {
        println!(
            "== {label}: {} call(s), answer {:?}",
            traj.call_count(),
            traj.final_answer_raw.as_deref().unwrap_or("")
        );
        for rung in Rung::ALL {
            let b = score(rung, traj, gold).unwrap();
            let parts: Vec<String> = b
                .components
                .iter()
                .map(|(k, v)| format!("{k}={v:.3}"))
                .collect();
            println!("  {:<16} total={:.4}  ({})", b.rung, b.total, parts.join(", "));
        }
        println!();
    }

    println!(
        "note: the degenerate trajectory maxes the retrieval component (retrv=1.0)\n\
         while its exact match is 0 — the proxy and the outcome pull apart."
    );
}
