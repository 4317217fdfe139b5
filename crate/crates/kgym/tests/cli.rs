//! End-to-end checks of the `kgym` binary: subcommand wiring, config and
//! environment resolution, and the 0/1/2 exit-code contract.

use std::fs;
use std::path::Path;
use std::process::Command;

use kgym::fixtures;
use kgym::gold::GoldSet;
use kgym::pipeline;

fn write_bundle(dir: &Path) {
    let mut rows = String::new();
    for t in fixtures::g0_triples() {
        rows.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
    }
    fs::write(dir.join("graph.tsv"), rows).unwrap();
    let mut rows = String::new();
    for (e, label) in fixtures::g0_aliases() {
        rows.push_str(&format!("{e}\t{label}\n"));
    }
    fs::write(dir.join("aliases.tsv"), rows).unwrap();
    let gold_lines: Vec<String> = fixtures::g0_gold_records()
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    fs::write(dir.join("gold.jsonl"), gold_lines.join("\n") + "\n").unwrap();

    let g = fixtures::g0();
    let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
    let corpus = pipeline::gen_sft_corpus(&golds, &g, 0).unwrap();
    pipeline::write_jsonl(&dir.join("traj.jsonl"), &corpus).unwrap();
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgym"))
}

#[test]
fn load_and_score_succeed() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());

    let out = bin()
        .args(["load", "--graph"])
        .arg(dir.path().join("graph.tsv"))
        .arg("--aliases")
        .arg(dir.path().join("aliases.tsv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("triples: 7"), "{stdout}");

    let out = bin()
        .args(["score", "--reward", "R-stepwise", "--graph"])
        .arg(dir.path().join("graph.tsv"))
        .arg("--aliases")
        .arg(dir.path().join("aliases.tsv"))
        .arg("--gold")
        .arg(dir.path().join("gold.jsonl"))
        .arg("--traj")
        .arg(dir.path().join("traj.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("\"em_rate\": 1.0"), "{stdout}");
}

#[test]
fn config_file_and_env_supply_paths() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    let config = dir.path().join("kgym.toml");
    fs::write(
        &config,
        format!(
            "graph = {:?}\naliases = {:?}\ngold = {:?}\n",
            dir.path().join("graph.tsv"),
            dir.path().join("aliases.tsv"),
            dir.path().join("gold.jsonl"),
        ),
    )
    .unwrap();

    let out = bin()
        .arg("--config")
        .arg(&config)
        .args(["classify", "--traj"])
        .arg(dir.path().join("traj.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"correct-via-tool\": 2"));

    // env var beats nothing; flag would beat env
    let out = bin()
        .env("KGYM_GRAPH", dir.path().join("graph.tsv"))
        .env("KGYM_ALIASES", dir.path().join("aliases.tsv"))
        .env("KGYM_GOLD", dir.path().join("gold.jsonl"))
        .args(["classify", "--traj"])
        .arg(dir.path().join("traj.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());

    // 1: usage (unknown flag)
    let out = bin().args(["score", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // 1: usage (unknown reward rung)
    let out = bin()
        .args(["score", "--reward", "R-nope", "--graph"])
        .arg(dir.path().join("graph.tsv"))
        .arg("--gold")
        .arg(dir.path().join("gold.jsonl"))
        .arg("--traj")
        .arg(dir.path().join("traj.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // 1: usage (no gold path anywhere)
    let out = bin()
        .args(["classify", "--graph"])
        .arg(dir.path().join("graph.tsv"))
        .arg("--traj")
        .arg(dir.path().join("traj.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // 2: data error (missing file)
    let out = bin()
        .args(["load", "--graph"])
        .arg(dir.path().join("missing.tsv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 2: data error (unresolved qid)
    fs::write(
        dir.path().join("stray.jsonl"),
        "{\"qid\":\"nope\",\"transcript\":\"<answer>x</answer>\"}\n",
    )
    .unwrap();
    let out = bin()
        .args(["score", "--graph"])
        .arg(dir.path().join("graph.tsv"))
        .arg("--gold")
        .arg(dir.path().join("gold.jsonl"))
        .arg("--traj")
        .arg(dir.path().join("stray.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 0: help
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sim_and_filter_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path());
    let traj_out = dir.path().join("sim.jsonl");
    let report_out = dir.path().join("sim_report.json");

    let out = bin()
        .args(["sim", "--policy", "gold-path", "--reward", "R-selfV", "--graph"])
        .arg(dir.path().join("graph.tsv"))
        .arg("--aliases")
        .arg(dir.path().join("aliases.tsv"))
        .arg("--gold")
        .arg(dir.path().join("gold.jsonl"))
        .arg("--out")
        .arg(&traj_out)
        .arg("--report")
        .arg(&report_out)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["filter-distill", "--gold"])
        .arg(dir.path().join("gold.jsonl"))
        .arg("--traj")
        .arg(&traj_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"yield_fraction\": 1.0"));

    let out = bin()
        .arg("report")
        .arg(&report_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Tools/Q"), "{stdout}");
}
