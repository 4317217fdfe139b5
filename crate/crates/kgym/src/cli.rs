//! Command-line interface: one subcommand per batch pipeline, plus the
//! tool server. The binary is a thin shell over the library — everything
//! here delegates to `pipeline`, `policy`, `diagnostics`, and `wire`.
//!
//! Paths resolve with precedence: explicit flag, then `KGYM_GRAPH` /
//! `KGYM_ALIASES` / `KGYM_GOLD` environment variables, then the optional
//! TOML config file (`--config`, or `kgym.toml` in the working directory).
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::diagnostics::{behavioral_diff, error_denominators, ExtractionStrategy, NullWeighting};
use crate::gold::GoldSet;
use crate::kg::KnowledgeGraph;
use crate::pipeline::{self, PipelineError, TranscriptRecord};
use crate::policy::ScriptedPolicy;
use crate::respond::DEFAULT_RESPONSE_CAP;
use crate::reward::Rung;
use crate::stats::{RunReport, ScoredRecord};
use crate::wire;

#[derive(Debug, Parser)]
#[command(
    name = "kgym",
    about = "Knowledge-graph tool environment and trajectory evaluation harness",
    version
)]
pub struct Cli {
    /// TOML config file with default paths and the response cap.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct GraphArgs {
    /// Tab-separated triple file (head<TAB>relation<TAB>tail).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Optional alias file (entity<TAB>label).
    #[arg(long)]
    aliases: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graph from files, verify its invariants, print stats.
    Load {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Serve the four verbs over the framed-JSON protocol (or HTTP).
    Serve {
        #[command(flatten)]
        graph: GraphArgs,
        /// Address to bind, e.g. 127.0.0.1:7407.
        #[arg(long, default_value = "127.0.0.1:7407")]
        addr: String,
        /// Serve the HTTP POST binding instead of the framed protocol.
        #[arg(long)]
        http: bool,
        /// Response truncation cap (items per reply).
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Parse, score, classify, and aggregate a trajectory dump.
    Score {
        #[command(flatten)]
        graph: GraphArgs,
        /// Trajectory dump (JSONL: {"qid", "transcript"}).
        #[arg(long)]
        traj: PathBuf,
        /// Gold records (JSONL).
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Reward rung name, e.g. R-selfV.
        #[arg(long, default_value = "R-toolverbs")]
        reward: String,
        /// Scored per-trajectory JSONL output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run report JSON output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Classify a dump into the seven categories (no reward involved).
    Classify {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Per-trajectory category JSONL output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render report JSONs as an aligned text table.
    Report {
        /// Report JSON files produced by `score` or `sim`.
        files: Vec<PathBuf>,
        /// Also print the error denominators (needs strict counts inline).
        #[arg(long)]
        denominators: bool,
    },
    /// Re-execute a dump with gold relations injected at each fetch.
    ReplayOracle {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Answer extraction strategy.
        #[arg(long, default_value = "quote-if-present")]
        extraction: String,
        /// Per-trajectory replay JSONL output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edit-distance buckets over the kg-incomplete slice of a dump.
    Buckets {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Null model weighting: uniform or frequency.
        #[arg(long, default_value = "uniform")]
        null_weighting: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-call behavioral diff between two scored runs.
    Diff {
        /// Scored JSONL of run A (from `score --out`).
        #[arg(long)]
        run_a: PathBuf,
        /// Scored JSONL of run B.
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the rule-based gold-path corpus for a gold set.
    GenSft {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Think-template selector seed.
        #[arg(long, default_value_t = 0)]
        template_seed: u64,
        /// Transcript dump JSONL output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the self-distillation filter to a dump.
    FilterDistill {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Kept transcripts JSONL output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rejected transcripts (with reasons) JSONL output.
        #[arg(long)]
        rejected: Option<PathBuf>,
    },
    /// Run a scripted policy over a gold set and score it.
    Sim {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Policy name: gold-path, quote-and-stop, ritual-single-call,
        /// format-drift, memory-answer.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value = "R-toolverbs")]
        reward: String,
        /// Trajectory dump JSONL output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run report JSON output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Drift severity in [0,1] for format-drift.
        #[arg(long)]
        drift_severity: Option<f64>,
        /// Think-template selector seed for gold-path and format-drift.
        #[arg(long)]
        template_seed: Option<u64>,
        /// JSON file with a {qid: answer} memory table for the ritual and
        /// memory policies.
        #[arg(long)]
        memory: Option<PathBuf>,
        /// Fallback answer when the memory table misses.
        #[arg(long, default_value = "unknown")]
        fallback: String,
    },
}

/// Optional TOML config: default paths plus the response cap.
#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    graph: Option<PathBuf>,
    aliases: Option<PathBuf>,
    gold: Option<PathBuf>,
    response_cap: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] PipelineError),
    #[error("{0}")]
    DataMsg(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::DataMsg(e.to_string())
    }
}

fn load_config(explicit: Option<&Path>) -> Result<ConfigFile, CliError> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let default = PathBuf::from("kgym.toml");
            if !default.exists() {
                return Ok(ConfigFile::default());
            }
            default
        }
    };
    let body = std::fs::read_to_string(&path)
        .map_err(|e| CliError::DataMsg(format!("{}: {e}", path.display())))?;
    toml::from_str(&body).map_err(|e| CliError::DataMsg(format!("{}: {e}", path.display())))
}

fn env_path(key: &str) -> Option<PathBuf> {
    std::env::var_os(key).map(PathBuf::from)
}

fn resolve(
    flag: Option<PathBuf>,
    env_key: &str,
    config_value: &Option<PathBuf>,
    what: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| env_path(env_key))
        .or_else(|| config_value.clone())
        .ok_or_else(|| {
            CliError::Usage(format!(
                "no {what} given: pass the flag, set {env_key}, or put it in the config file"
            ))
        })
}

fn resolve_optional(
    flag: Option<PathBuf>,
    env_key: &str,
    config_value: &Option<PathBuf>,
) -> Option<PathBuf> {
    flag.or_else(|| env_path(env_key))
        .or_else(|| config_value.clone())
}

fn load_graph(args: GraphArgs, config: &ConfigFile) -> Result<KnowledgeGraph, CliError> {
    let graph = resolve(args.graph, "KGYM_GRAPH", &config.graph, "graph file")?;
    let aliases = resolve_optional(args.aliases, "KGYM_ALIASES", &config.aliases);
    Ok(pipeline::load_graph_from_paths(&graph, aliases.as_deref())?)
}

fn load_gold(flag: Option<PathBuf>, config: &ConfigFile) -> Result<GoldSet, CliError> {
    let path = resolve(flag, "KGYM_GOLD", &config.gold, "gold file")?;
    Ok(pipeline::load_gold_from_path(&path)?)
}

fn parse_rung(name: &str) -> Result<Rung, CliError> {
    Rung::from_name(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown reward rung {name:?}; known: {}",
            Rung::ALL.map(|r| r.name()).join(", ")
        ))
    })
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Load { graph } => {
            let g = load_graph(graph, &config)?;
            g.check_invariants().map_err(CliError::DataMsg)?;
            println!(
                "triples: {}\nentities: {}\nrelations: {}\naliases: {} ({} overwritten)",
                g.triple_count(),
                g.entity_count(),
                g.relation_vocabulary().len(),
                g.alias_count(),
                g.alias_overwrites(),
            );
        }
        Command::Serve {
            graph,
            addr,
            http,
            cap,
        } => {
            let g = Arc::new(load_graph(graph, &config)?);
            let cap = cap.or(config.response_cap).unwrap_or(DEFAULT_RESPONSE_CAP);
            let handle = if http {
                wire::serve_http(g, addr.as_str(), cap)?
            } else {
                wire::serve_framed(g, addr.as_str(), cap)?
            };
            eprintln!(
                "serving {} on {}",
                if http { "http" } else { "framed json" },
                handle.addr()
            );
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        Command::Score {
            graph,
            traj,
            gold,
            reward,
            out,
            report,
        } => {
            let g = load_graph(graph, &config)?;
            let golds = load_gold(gold, &config)?;
            let rung = parse_rung(&reward)?;
            let (run_report, _records) =
                pipeline::score_file(&traj, &golds, &g, rung, out.as_deref(), report.as_deref())?;
            print_json(&run_report);
        }
        Command::Classify {
            graph,
            traj,
            gold,
            out,
        } => {
            let g = load_graph(graph, &config)?;
            let golds = load_gold(gold, &config)?;
            let (histogram, _records) =
                pipeline::classify_file(&traj, &golds, &g, out.as_deref())?;
            print_json(&histogram);
        }
        Command::Report {
            files,
            denominators,
        } => {
            if files.is_empty() {
                return Err(CliError::Usage("report needs at least one file".into()));
            }
            let mut loaded: Vec<(String, RunReport)> = Vec::new();
            for path in &files {
                let body = std::fs::read_to_string(path)
                    .map_err(|e| CliError::DataMsg(format!("{}: {e}", path.display())))?;
                let report: RunReport = serde_json::from_str(&body)
                    .map_err(|e| CliError::DataMsg(format!("{}: {e}", path.display())))?;
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                loaded.push((label, report));
            }
            let rows: Vec<(&str, &RunReport)> = loaded
                .iter()
                .map(|(label, report)| (label.as_str(), report))
                .collect();
            print!("{}", RunReport::table(&rows));
            if denominators {
                for (label, report) in &loaded {
                    let strict = report.n - report.strict_em_count;
                    match error_denominators(report, strict) {
                        Ok(d) => println!("{label}: {}", serde_json::to_string(&d).unwrap()),
                        Err(e) => return Err(CliError::DataMsg(e.to_string())),
                    }
                }
            }
        }
        Command::ReplayOracle {
            graph,
            traj,
            gold,
            extraction,
            out,
        } => {
            let g = load_graph(graph, &config)?;
            let golds = load_gold(gold, &config)?;
            let strategy = ExtractionStrategy::from_name(&extraction)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let (summary, _records) =
                pipeline::replay_file(&traj, &golds, &g, strategy, out.as_deref())?;
            print_json(&summary);
        }
        Command::Buckets {
            graph,
            traj,
            gold,
            null_weighting,
            out,
        } => {
            let g = load_graph(graph, &config)?;
            let golds = load_gold(gold, &config)?;
            let weighting = match null_weighting.as_str() {
                "uniform" => NullWeighting::Uniform,
                "frequency" => NullWeighting::Frequency,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown null weighting {other:?}; use uniform or frequency"
                    )))
                }
            };
            let report = pipeline::bucket_file(&traj, &golds, &g, weighting)?;
            if let Some(path) = out {
                pipeline::write_json_pretty(&path, &report)?;
            }
            print_json(&report);
        }
        Command::Diff { run_a, run_b, out } => {
            let a: Vec<ScoredRecord> = pipeline::read_jsonl(&run_a)?;
            let b: Vec<ScoredRecord> = pipeline::read_jsonl(&run_b)?;
            let hist = behavioral_diff(&a, &b).map_err(|e| CliError::DataMsg(e.to_string()))?;
            if let Some(path) = out {
                pipeline::write_json_pretty(&path, &hist)?;
            }
            print_json(&hist);
        }
        Command::GenSft {
            graph,
            gold,
            template_seed,
            out,
        } => {
            let g = load_graph(graph, &config)?;
            let golds = load_gold(gold, &config)?;
            let corpus = pipeline::gen_sft_corpus(&golds, &g, template_seed)?;
            pipeline::write_jsonl(&out, &corpus)?;
            eprintln!("wrote {} trajectories to {}", corpus.len(), out.display());
        }
        Command::FilterDistill {
            traj,
            gold,
            out,
            rejected,
        } => {
            let golds = load_gold(gold, &config)?;
            let records: Vec<TranscriptRecord> = pipeline::read_jsonl(&traj)?;
            let (summary, kept, rejected_records) = pipeline::filter_dump(records, &golds)?;
            if let Some(path) = out {
                pipeline::write_jsonl(&path, &kept)?;
            }
            if let Some(path) = rejected {
                pipeline::write_jsonl(&path, &rejected_records)?;
            }
            print_json(&summary);
        }
        Command::Sim {
            graph,
            gold,
            policy,
            reward,
            out,
            report,
            drift_severity,
            template_seed,
            memory,
            fallback,
        } => {
            let g = load_graph(graph, &config)?;
            let golds = load_gold(gold, &config)?;
            let rung = parse_rung(&reward)?;
            let memory_table: BTreeMap<String, String> = match memory {
                Some(path) => {
                    let body = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::DataMsg(format!("{}: {e}", path.display())))?;
                    serde_json::from_str(&body)
                        .map_err(|e| CliError::DataMsg(format!("{}: {e}", path.display())))?
                }
                None => BTreeMap::new(),
            };
            let policy = match policy.as_str() {
                "gold-path" => ScriptedPolicy::GoldPath {
                    template_seed: template_seed.unwrap_or(0),
                },
                "quote-and-stop" => ScriptedPolicy::QuoteAndStop,
                "ritual-single-call" => ScriptedPolicy::RitualSingleCall {
                    answers: memory_table,
                    fallback,
                },
                "format-drift" => ScriptedPolicy::FormatDrift {
                    severity: drift_severity.unwrap_or(0.5),
                    template_seed: template_seed.unwrap_or(0),
                },
                "memory-answer" => ScriptedPolicy::MemoryAnswer {
                    answers: memory_table,
                    fallback,
                },
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown policy {other:?}; known: {}",
                        ScriptedPolicy::NAMES.join(", ")
                    )))
                }
            };
            let run_report =
                pipeline::sim_to_files(&policy, &golds, &g, rung, out.as_deref(), report.as_deref())?;
            print_json(&run_report);
        }
    }
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
