//! Batch file pipelines: the JSONL formats and the end-to-end operations
//! behind the CLI subcommands — parse → score → classify → aggregate,
//! oracle replay, bucketing, diffing, corpus generation, and filtering.
//!
//! Output is deterministic: records are processed in input order, maps are
//! ordered, and nothing timestamped goes into a data payload, so identical
//! inputs produce byte-identical outputs.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    self, BucketLabel, DiagnosticsError, ExtractionStrategy, NullWeighting,
};
use crate::gold::{GoldError, GoldSet};
use crate::kg::{KnowledgeGraph, LoadError};
use crate::policy::{self, RejectReason, ScriptedPolicy, SimError};
use crate::reward::{Rung, RewardError};
use crate::stats::{score_run, RunReport, ScoredRecord, StatsError};
use crate::trajectory::{parse_transcript, render, Trajectory};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown reward rung {0:?}")]
    UnknownRung(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Gold(#[from] GoldError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

fn io_err(path: &Path, source: io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One line of a trajectory dump: the raw transcript for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub qid: String,
    pub transcript: String,
}

/// Reads JSON-lines records of any deserializable type, with line numbers
/// on parse failures.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Vec<T>, PipelineError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            line: idx + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| io_err(path, io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| io_err(path, io::Error::other(e)))?;
    std::fs::write(path, body + "\n").map_err(|e| io_err(path, e))
}

/// Loads a graph from the tab-separated triple file, plus aliases when
/// given.
pub fn load_graph_from_paths(
    graph: &Path,
    aliases: Option<&Path>,
) -> Result<KnowledgeGraph, PipelineError> {
    let triples = BufReader::new(File::open(graph).map_err(|e| io_err(graph, e))?);
    let aliases = match aliases {
        Some(p) => Some(BufReader::new(File::open(p).map_err(|e| io_err(p, e))?)),
        None => None,
    };
    Ok(KnowledgeGraph::load(triples, aliases)?)
}

pub fn load_gold_from_path(path: &Path) -> Result<GoldSet, PipelineError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(GoldSet::from_jsonl(BufReader::new(file))?)
}

/// Parses a dump into trajectories (parallel, order-preserving).
pub fn parse_dump(records: &[TranscriptRecord]) -> Vec<Trajectory> {
    records
        .par_iter()
        .map(|r| parse_transcript(&r.transcript).with_qid(r.qid.clone()))
        .collect()
}

pub fn resolve_rung(name: &str) -> Result<Rung, PipelineError> {
    Rung::from_name(name).ok_or_else(|| PipelineError::UnknownRung(name.to_string()))
}

/// The `score` pipeline: parse, score, classify, aggregate; writes scored
/// JSONL and a report JSON when paths are given.
pub fn score_file(
    traj_path: &Path,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    rung: Rung,
    out_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<(RunReport, Vec<ScoredRecord>), PipelineError> {
    let dump: Vec<TranscriptRecord> = read_jsonl(traj_path)?;
    let trajs = parse_dump(&dump);
    let (report, records) = score_run(&trajs, golds, g, rung)?;
    if let Some(path) = out_path {
        write_jsonl(path, &records)?;
    }
    if let Some(path) = report_path {
        write_json_pretty(path, &report)?;
    }
    Ok((report, records))
}

/// Per-question classification line (the no-reward slice of scoring).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    pub qid: String,
    pub category: crate::classify::Category,
    pub em: bool,
    pub strict_em: bool,
    pub flags: Vec<crate::trajectory::FormatFlag>,
}

/// Classifies a dump without scoring a reward rung.
pub fn classify_file(
    traj_path: &Path,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    out_path: Option<&Path>,
) -> Result<
    (
        std::collections::BTreeMap<crate::classify::Category, usize>,
        Vec<ClassifiedRecord>,
    ),
    PipelineError,
> {
    use crate::classify::{classify, strict_em, Category};
    let dump: Vec<TranscriptRecord> = read_jsonl(traj_path)?;
    let trajs = parse_dump(&dump);
    let mut histogram: std::collections::BTreeMap<Category, usize> =
        Category::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut records = Vec::with_capacity(trajs.len());
    for traj in &trajs {
        let gold = golds.require(&traj.question_id)?;
        let norm_golds = gold.normalized_answers();
        let em = !norm_golds.is_empty()
            && crate::reward::exact_match(&traj.normalized_answer(), &norm_golds)
                .unwrap_or(0.0)
                == 1.0;
        let category = classify(traj, gold, g);
        *histogram.get_mut(&category).expect("all categories") += 1;
        records.push(ClassifiedRecord {
            qid: traj.question_id.clone(),
            category,
            em,
            strict_em: strict_em(traj, gold),
            flags: traj.flags.iter().copied().collect(),
        });
    }
    if let Some(path) = out_path {
        write_jsonl(path, &records)?;
    }
    Ok((histogram, records))
}

/// Per-question oracle-replay outcome line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub qid: String,
    pub reachable: bool,
    pub replayed_answer: String,
    pub em_delta: i32,
}

/// Aggregate replay outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub n: usize,
    pub reachable_count: usize,
    pub em_before: usize,
    pub em_after: usize,
    pub extraction: String,
}

/// Replays every trajectory with gold relations injected.
pub fn replay_file(
    traj_path: &Path,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    strategy: ExtractionStrategy,
    out_path: Option<&Path>,
) -> Result<(ReplaySummary, Vec<ReplayRecord>), PipelineError> {
    let dump: Vec<TranscriptRecord> = read_jsonl(traj_path)?;
    let trajs = parse_dump(&dump);
    let mut records = Vec::with_capacity(trajs.len());
    let mut reachable_count = 0usize;
    let mut em_before = 0usize;
    let mut em_after = 0usize;
    for traj in &trajs {
        let gold = golds.require(&traj.question_id)?;
        let result = diagnostics::oracle_relation_replay(traj, gold, g, strategy)?;
        reachable_count += result.reachable as usize;
        let golds_norm = gold.normalized_answers();
        let before = !golds_norm.is_empty()
            && crate::reward::exact_match(&traj.normalized_answer(), &golds_norm)
                .unwrap_or(0.0)
                == 1.0;
        em_before += before as usize;
        em_after += (before as i32 + result.em_delta).max(0) as usize;
        records.push(ReplayRecord {
            qid: traj.question_id.clone(),
            reachable: result.reachable,
            replayed_answer: result.replayed_answer,
            em_delta: result.em_delta,
        });
    }
    if let Some(path) = out_path {
        write_jsonl(path, &records)?;
    }
    let summary = ReplaySummary {
        n: records.len(),
        reachable_count,
        em_before,
        em_after,
        extraction: strategy.name().to_string(),
    };
    Ok((summary, records))
}

/// Bucket analysis over the kg-incomplete slice of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketReport {
    /// Trajectories analyzed (classified kg-incomplete).
    pub n: usize,
    pub histogram: std::collections::BTreeMap<BucketLabel, usize>,
    /// Observed rate of the relation-typo bucket.
    pub typo_rate: f64,
    /// Mean null rate of that bucket under random relations.
    pub null_typo_rate: f64,
    /// observed / null, absent when the null rate is zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<f64>,
    pub null_weighting: NullWeighting,
}

/// Buckets the kg-incomplete trajectories of a dump and compares the
/// relation-typo rate against the random-relation null.
pub fn bucket_file(
    traj_path: &Path,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    weighting: NullWeighting,
) -> Result<BucketReport, PipelineError> {
    let dump: Vec<TranscriptRecord> = read_jsonl(traj_path)?;
    let trajs = parse_dump(&dump);
    let mut pairs = Vec::new();
    for traj in &trajs {
        let gold = golds.require(&traj.question_id)?;
        if crate::classify::classify(traj, gold, g) == crate::classify::Category::KgIncomplete {
            pairs.push((traj, gold));
        }
    }
    let histogram = diagnostics::bucket_histogram(pairs.iter().map(|(t, g)| (*t, *g)));
    let n = pairs.len();
    let typo = histogram[&BucketLabel::RelationTypoLeq1];
    let typo_rate = if n == 0 { 0.0 } else { typo as f64 / n as f64 };
    let null_typo_rate = if n == 0 {
        0.0
    } else {
        pairs
            .iter()
            .map(|(_, gold)| diagnostics::relation_typo_null_rate(g, gold, weighting))
            .sum::<f64>()
            / n as f64
    };
    Ok(BucketReport {
        n,
        histogram,
        typo_rate,
        null_typo_rate,
        enrichment: diagnostics::enrichment_ratio(typo_rate, null_typo_rate),
        null_weighting: weighting,
    })
}

/// Generates the rule-based gold-path corpus for a gold set.
pub fn gen_sft_corpus(
    golds: &GoldSet,
    g: &KnowledgeGraph,
    template_seed: u64,
) -> Result<Vec<TranscriptRecord>, PipelineError> {
    golds
        .records()
        .iter()
        .map(|gold| {
            let traj = policy::gen_gold_trajectory(gold, g, template_seed)?;
            Ok(TranscriptRecord {
                qid: gold.qid.clone(),
                transcript: render(&traj),
            })
        })
        .collect()
}

/// Filter outcome over a dump, echoing the original transcript lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total: usize,
    pub kept: usize,
    pub yield_fraction: f64,
    pub rejected_by_reason: std::collections::BTreeMap<RejectReason, usize>,
}

/// Rejected dump line with its reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub qid: String,
    pub reason: RejectReason,
    pub transcript: String,
}

/// Applies the self-distillation filter to a dump.
pub fn filter_dump(
    records: Vec<TranscriptRecord>,
    golds: &GoldSet,
) -> Result<(FilterSummary, Vec<TranscriptRecord>, Vec<RejectedRecord>), PipelineError> {
    let total = records.len();
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    let mut by_reason: std::collections::BTreeMap<RejectReason, usize> = Default::default();
    for rec in records {
        let traj = parse_transcript(&rec.transcript).with_qid(rec.qid.clone());
        let gold = golds.require(&rec.qid)?;
        match policy::distill_verdict(&traj, gold) {
            None => kept.push(rec),
            Some(reason) => {
                *by_reason.entry(reason).or_default() += 1;
                rejected.push(RejectedRecord {
                    qid: rec.qid,
                    reason,
                    transcript: rec.transcript,
                });
            }
        }
    }
    let summary = FilterSummary {
        total,
        kept: kept.len(),
        yield_fraction: if total == 0 {
            0.0
        } else {
            kept.len() as f64 / total as f64
        },
        rejected_by_reason: by_reason,
    };
    Ok((summary, kept, rejected))
}

/// Simulates a scripted policy over a gold set, writing the rendered
/// trajectory dump and the run report.
pub fn sim_to_files(
    policy: &ScriptedPolicy,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    rung: Rung,
    out_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<RunReport, PipelineError> {
    let outcome = policy::simulate_run(policy, golds, g, rung)?;
    if let Some(path) = out_path {
        let dump: Vec<TranscriptRecord> = outcome
            .trajectories
            .iter()
            .map(|t| TranscriptRecord {
                qid: t.question_id.clone(),
                transcript: render(t),
            })
            .collect();
        write_jsonl(path, &dump)?;
    }
    if let Some(path) = report_path {
        write_json_pretty(path, &outcome.report)?;
    }
    Ok(outcome.report)
}
