//! Error-analysis machinery: edit-distance bucketing of first calls,
//! gold-relation oracle replay, the retrieval-composition vs
//! answer-extraction split, behavioral query diffs between runs, and the
//! three error denominators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{classify, Category};
use crate::gold::{GoldError, GoldRecord, GoldSet};
use crate::kg::KnowledgeGraph;
use crate::respond;
use crate::reward::exact_match;
use crate::stats::{RunReport, ScoredRecord};
use crate::text;
use crate::trajectory::{CallArgs, ParseOptions, ToolCall, Trajectory, Turn};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("gold chain is empty for qid {0:?}")]
    EmptyChain(String),
    #[error("trajectory {qid:?} is {category}, not a retrieval-dependent error")]
    NotRetrievalDependent { qid: String, category: Category },
    #[error("no shared kg-incomplete qids between the two runs")]
    EmptyOverlap,
    #[error("category histogram sums to {sum}, expected n = {n}")]
    InconsistentHistogram { sum: usize, n: usize },
    #[error("unknown extraction strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Gold(#[from] GoldError),
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = (ca != cb) as usize;
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Decision-boundary buckets for the first call of an error trajectory,
/// evaluated with precedence 1→4, first match wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BucketLabel {
    #[serde(rename = "relation-typo-leq1")]
    RelationTypoLeq1,
    #[serde(rename = "entity-correct-wrong-relation")]
    EntityCorrectWrongRelation,
    #[serde(rename = "wrong-entity-near-miss")]
    WrongEntityNearMiss,
    #[serde(rename = "format-or-genuine-miss")]
    FormatOrGenuineMiss,
}

impl BucketLabel {
    pub const ALL: [BucketLabel; 4] = [
        BucketLabel::RelationTypoLeq1,
        BucketLabel::EntityCorrectWrongRelation,
        BucketLabel::WrongEntityNearMiss,
        BucketLabel::FormatOrGenuineMiss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BucketLabel::RelationTypoLeq1 => "relation-typo-leq1",
            BucketLabel::EntityCorrectWrongRelation => "entity-correct-wrong-relation",
            BucketLabel::WrongEntityNearMiss => "wrong-entity-near-miss",
            BucketLabel::FormatOrGenuineMiss => "format-or-genuine-miss",
        }
    }
}

/// Buckets a trajectory by its first call against the gold chain.
///
/// Bucket 1 requires the relation argument to sit at edit distance exactly
/// 1 from some chain relation: distance 0 means the relation was right and
/// the error lies elsewhere, so exact hits fall through.
pub fn bucketize(traj: &Trajectory, gold: &GoldRecord) -> BucketLabel {
    let Some(first) = traj.calls().next() else {
        return BucketLabel::FormatOrGenuineMiss;
    };
    let Some(args) = &first.args else {
        return BucketLabel::FormatOrGenuineMiss;
    };
    let rel_dist: Option<usize> = args.relation.as_deref().and_then(|rel| {
        gold.chain_relations()
            .iter()
            .map(|r| levenshtein(rel, r.as_str()))
            .min()
    });
    let entity_match = gold
        .chain_entities()
        .iter()
        .any(|e| e.as_str() == args.entity);
    if rel_dist == Some(1) {
        BucketLabel::RelationTypoLeq1
    } else if entity_match && rel_dist.is_none_or(|d| d >= 2) {
        BucketLabel::EntityCorrectWrongRelation
    } else if !entity_match && rel_dist.is_some_and(|d| d <= 1) {
        BucketLabel::WrongEntityNearMiss
    } else {
        BucketLabel::FormatOrGenuineMiss
    }
}

/// Bucket histogram over a set of trajectories (all four keys present).
pub fn bucket_histogram<'a, I>(pairs: I) -> BTreeMap<BucketLabel, usize>
where
    I: IntoIterator<Item = (&'a Trajectory, &'a GoldRecord)>,
{
    let mut hist: BTreeMap<BucketLabel, usize> =
        BucketLabel::ALL.into_iter().map(|b| (b, 0)).collect();
    for (traj, gold) in pairs {
        *hist.get_mut(&bucketize(traj, gold)).expect("all buckets") += 1;
    }
    hist
}

/// Relation sampling scheme for the null model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullWeighting {
    Uniform,
    Frequency,
}

/// Probability that a relation drawn from the graph vocabulary lands at
/// edit distance exactly 1 from some gold-chain relation. Computed by
/// exact enumeration over the vocabulary rather than sampling, which is
/// the same expectation with zero variance at desk scale.
pub fn relation_typo_null_rate(
    g: &KnowledgeGraph,
    gold: &GoldRecord,
    weighting: NullWeighting,
) -> f64 {
    let vocab = g.relation_vocabulary();
    if vocab.is_empty() || gold.chain.is_empty() {
        return 0.0;
    }
    let mut matched = 0.0f64;
    let mut total = 0.0f64;
    for (rel, freq) in &vocab {
        let w = match weighting {
            NullWeighting::Uniform => 1.0,
            NullWeighting::Frequency => *freq as f64,
        };
        total += w;
        let dist = gold
            .chain_relations()
            .iter()
            .map(|r| levenshtein(rel.as_str(), r.as_str()))
            .min();
        if dist == Some(1) {
            matched += w;
        }
    }
    matched / total
}

/// Observed-over-null enrichment; `None` when the null rate is zero.
pub fn enrichment_ratio(observed: f64, null: f64) -> Option<f64> {
    (null > 0.0).then(|| observed / null)
}

/// Answer-extraction strategy applied after oracle replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionStrategy {
    /// Emit the first replayed response line that matches a gold answer;
    /// keep the original answer when none does.
    QuoteIfPresent,
}

impl ExtractionStrategy {
    pub fn from_name(name: &str) -> Result<Self, DiagnosticsError> {
        match name {
            "quote-if-present" => Ok(ExtractionStrategy::QuoteIfPresent),
            other => Err(DiagnosticsError::UnknownStrategy(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExtractionStrategy::QuoteIfPresent => "quote-if-present",
        }
    }
}

/// Outcome of replaying one trajectory with gold relations injected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayResult {
    pub trajectory: Trajectory,
    /// Some replayed response line equals a gold answer.
    pub reachable: bool,
    pub replayed_answer: String,
    /// Exact-match flip under the extraction strategy: -1, 0, or +1.
    pub em_delta: i32,
}

/// Re-executes a trajectory with the model's relation argument replaced by
/// the gold-chain relation at the matching hop (i-th entity-fetch call ↔
/// i-th hop, clamped to the last hop) while keeping its entity argument.
/// Relation-listing and unparseable calls pass through; every parsed call
/// is re-executed against the graph.
pub fn oracle_relation_replay(
    traj: &Trajectory,
    gold: &GoldRecord,
    g: &KnowledgeGraph,
    strategy: ExtractionStrategy,
) -> Result<ReplayResult, DiagnosticsError> {
    if gold.chain.is_empty() {
        return Err(DiagnosticsError::EmptyChain(gold.qid.clone()));
    }
    let golds = gold.normalized_answers();
    let mut fetch_idx = 0usize;
    let mut turns = Vec::with_capacity(traj.turns.len());
    for turn in &traj.turns {
        let mut new_turn = Turn {
            think: turn.think.clone(),
            call: turn.call.clone(),
            response_lines: turn.response_lines.clone(),
        };
        if let Some(call) = &turn.call {
            match &call.args {
                Some(args) if args.relation.is_some() => {
                    let hop = fetch_idx.min(gold.chain.len() - 1);
                    fetch_idx += 1;
                    let injected = CallArgs {
                        verb: args.verb,
                        entity: args.entity.clone(),
                        relation: Some(gold.chain[hop].relation.as_str().to_string()),
                    };
                    let raw_text = format!(
                        "{}({}, {})",
                        injected.verb,
                        injected.entity,
                        injected.relation.as_deref().unwrap_or("")
                    );
                    new_turn.response_lines = Some(respond::execute_args(g, &injected).lines);
                    new_turn.call = Some(ToolCall {
                        raw_text,
                        args: Some(injected),
                    });
                }
                Some(args) => {
                    new_turn.response_lines = Some(respond::execute_args(g, args).lines);
                }
                None => {
                    new_turn.response_lines = Some(Vec::new());
                }
            }
        }
        turns.push(new_turn);
    }
    let replayed = Trajectory {
        question_id: traj.question_id.clone(),
        turns,
        final_answer_raw: traj.final_answer_raw.clone(),
        flags: Default::default(),
        raw_bytes: 0,
    }
    .finalize(&ParseOptions::default());

    let line_matches_gold =
        |line: &str| -> bool { golds.iter().any(|g| *g == text::normalize(line)) };
    let reachable = replayed
        .turns
        .iter()
        .flat_map(|t| t.response_lines.iter().flatten())
        .any(|line| line_matches_gold(line));
    let original_answer = traj.final_answer_raw.clone().unwrap_or_default();
    let replayed_answer = match strategy {
        ExtractionStrategy::QuoteIfPresent => replayed
            .turns
            .iter()
            .flat_map(|t| t.response_lines.iter().flatten())
            .find(|line| line_matches_gold(line))
            .cloned()
            .unwrap_or(original_answer.clone()),
    };
    let em_of = |answer: &str| -> i32 {
        if golds.is_empty() {
            return 0;
        }
        exact_match(&text::normalize(answer), &golds).unwrap_or(0.0) as i32
    };
    let em_delta = em_of(&replayed_answer) - em_of(&original_answer);
    Ok(ReplayResult {
        trajectory: replayed,
        reachable,
        replayed_answer,
        em_delta,
    })
}

/// Partition of retrieval-dependent errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    /// The gold answer never appeared in any response: the query chain
    /// failed to compose.
    pub composition: usize,
    /// The gold answer was retrieved but not emitted.
    pub extraction: usize,
}

/// Splits retrieval-dependent error trajectories (categories kg-incomplete
/// and wrong-answer only) into composition vs extraction failures.
pub fn split_retrieval_vs_extraction(
    error_trajs: &[Trajectory],
    golds: &GoldSet,
    g: &KnowledgeGraph,
) -> Result<SplitCounts, DiagnosticsError> {
    let mut counts = SplitCounts {
        composition: 0,
        extraction: 0,
    };
    for traj in error_trajs {
        let gold = golds.require(&traj.question_id)?;
        let category = classify(traj, gold, g);
        if !matches!(category, Category::KgIncomplete | Category::WrongAnswer) {
            return Err(DiagnosticsError::NotRetrievalDependent {
                qid: traj.question_id.clone(),
                category,
            });
        }
        let norm_golds = gold.normalized_answers();
        let retrieved = traj
            .turns
            .iter()
            .flat_map(|t| t.response_lines.iter().flatten())
            .any(|line| norm_golds.iter().any(|g| *g == text::normalize(line)));
        if retrieved {
            counts.extraction += 1;
        } else {
            counts.composition += 1;
        }
    }
    Ok(counts)
}

/// First-call comparison outcomes between two runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiffOutcome {
    #[serde(rename = "same-entity-different-relation")]
    SameEntityDifferentRelation,
    #[serde(rename = "different-entity-same-relation")]
    DifferentEntitySameRelation,
    #[serde(rename = "both-differ")]
    BothDiffer,
    #[serde(rename = "identical")]
    Identical,
}

impl DiffOutcome {
    pub const ALL: [DiffOutcome; 4] = [
        DiffOutcome::SameEntityDifferentRelation,
        DiffOutcome::DifferentEntitySameRelation,
        DiffOutcome::BothDiffer,
        DiffOutcome::Identical,
    ];
}

/// Compares first-call (entity, relation) pairs over questions classified
/// kg-incomplete in both scored runs.
pub fn behavioral_diff(
    run_a: &[ScoredRecord],
    run_b: &[ScoredRecord],
) -> Result<BTreeMap<DiffOutcome, usize>, DiagnosticsError> {
    let b_index: BTreeMap<&str, &ScoredRecord> =
        run_b.iter().map(|r| (r.qid.as_str(), r)).collect();
    let mut hist: BTreeMap<DiffOutcome, usize> =
        DiffOutcome::ALL.into_iter().map(|d| (d, 0)).collect();
    let mut overlap = 0usize;
    for a in run_a {
        if a.category != Category::KgIncomplete {
            continue;
        }
        let Some(b) = b_index.get(a.qid.as_str()) else {
            continue;
        };
        if b.category != Category::KgIncomplete {
            continue;
        }
        let (Some(fa), Some(fb)) = (&a.first_call, &b.first_call) else {
            continue;
        };
        overlap += 1;
        let outcome = match (fa.entity == fb.entity, fa.relation == fb.relation) {
            (true, true) => DiffOutcome::Identical,
            (true, false) => DiffOutcome::SameEntityDifferentRelation,
            (false, true) => DiffOutcome::DifferentEntitySameRelation,
            (false, false) => DiffOutcome::BothDiffer,
        };
        *hist.get_mut(&outcome).expect("all outcomes") += 1;
    }
    if overlap == 0 {
        return Err(DiagnosticsError::EmptyOverlap);
    }
    Ok(hist)
}

/// The three error denominators. They are deliberately distinct counts
/// over different bases, not an additive decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDenominators {
    /// tool-misuse + kg-incomplete + wrong-answer (normalized error set).
    pub d3_normalized_errors: usize,
    /// d3 minus tool-misuse: kg-incomplete ∪ wrong-answer.
    pub d2_retrieval_dependent: usize,
    /// Strict exact-match error count, supplied by the caller.
    pub d1_strict_em_errors: usize,
}

/// Derives the denominators from a run report's category histogram,
/// checking that the histogram actually partitions the run.
pub fn error_denominators(
    report: &RunReport,
    strict_em_errors: usize,
) -> Result<ErrorDenominators, DiagnosticsError> {
    let sum: usize = report.category_histogram.values().sum();
    if sum != report.n {
        return Err(DiagnosticsError::InconsistentHistogram { sum, n: report.n });
    }
    let count = |c: Category| report.category_histogram.get(&c).copied().unwrap_or(0);
    let misuse = count(Category::ToolMisuse);
    let d3 = misuse + count(Category::KgIncomplete) + count(Category::WrongAnswer);
    Ok(ErrorDenominators {
        d3_normalized_errors: d3,
        d2_retrieval_dependent: d3 - misuse,
        d1_strict_em_errors: strict_em_errors,
    })
}
