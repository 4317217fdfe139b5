//! The statistics layer: Wilson intervals, McNemar paired tests, the
//! unbiased pass@k estimator, and Spearman rank correlation.
//!
//!     cargo run --example stats_toolkit

use kgym::stats::{mcnemar_p, pass_at_k, spearman_rho, wilson_ci};

fn main() {
    println!("Wilson 95% intervals on a 3531-question run:");
    for successes in [0usize, 133, 205, 338] {
        let ci = wilson_ci(successes, 3531, 0.95).unwrap();
        println!(
            "  {successes:>4}/3531 = {:>6.2}%  ->  [{:.2}%, {:.2}%]",
            successes as f64 / 35.31,
            ci.low * 100.0,
            ci.high * 100.0
        );
    }

    println!("\nMcNemar paired tests (b, c = discordant counts):");
    for (b, c) in [(0usize, 0usize), (10, 0), (30, 10), (12, 9)] {
        let branch = if b + c == 0 || b + c >= 25 { "chi-squared" } else { "exact" };
        println!("  b={b:<3} c={c:<3} p = {:<10.6} [{branch}]", mcnemar_p(b, c));
    }

    println!("\npass@k from 16 samples per question (8/16 correct each):");
    let counts = vec![(8usize, 16usize); 10];
    for k in [1usize, 2, 4, 8, 16] {
        println!("  pass@{k:<2} = {:.4}", pass_at_k(&counts, k).unwrap());
    }

    println!("\nSpearman rank correlation:");
    let xs = [1.0, 2.0, 3.0, 4.0];
    for (label, ys) in [
        ("identical order", [1.0, 2.0, 3.0, 4.0]),
        ("reversed order", [4.0, 3.0, 2.0, 1.0]),
        ("one swap", [1.0, 2.0, 4.0, 3.0]),
    ] {
        println!("  {label:<16} rho = {:+.3}", spearman_rho(&xs, &ys).unwrap());
    }
}
