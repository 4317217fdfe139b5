//! Scripted policies that reproduce, at desk scale, the behavioral
//! signatures of the known failure modes — plus the rule-based gold-path
//! generator and the self-distillation filter.
//!
//! Policies are deterministic functions of (policy, gold record, graph,
//! seed); no learned model is involved anywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::entity_in_answer;
use crate::gold::{GoldError, GoldRecord, GoldSet};
use crate::kg::KnowledgeGraph;
use crate::respond;
use crate::reward::{exact_match, Rung};
use crate::stats::{score_run, RunReport, ScoredRecord, StatsError};
use crate::trajectory::{
    parse_call, FormatFlag, ParseOptions, ToolVerb, Trajectory, Turn,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("gold chain is empty for qid {0:?}")]
    EmptyChain(String),
    #[error("gold chain for {qid:?} needs more than the five-call budget ({hops} hops)")]
    TooManyHops { qid: String, hops: usize },
    #[error("chain hop {hop} for {qid:?} is not executable on the graph")]
    ChainNotExecutable { qid: String, hop: usize },
    #[error("gold record {0:?} has no answers")]
    NoAnswers(String),
    #[error("gold record {0:?} has no seed entities")]
    NoSeeds(String),
    #[error(transparent)]
    Gold(#[from] GoldError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The three fixed think templates used by the gold-path generator. The
/// exact strings are part of the corpus format and stay stable so that
/// generated trajectories are reproducible across versions.
pub const THINK_TEMPLATES: [&str; 3] = [
    "I need to look at the relations available on {entity} and follow {relation}.",
    "The next hop starts from {entity}; {relation} should lead onward.",
    "From {entity} the promising edge is {relation}, so I will fetch it.",
];

/// Per-question turn budget: at most five tool-calling turns.
pub const MAX_CALLS: usize = 5;

fn fill_template(seed: u64, hop: usize, entity_label: &str, relation: &str) -> String {
    let idx = (seed as usize).wrapping_add(hop) % THINK_TEMPLATES.len();
    THINK_TEMPLATES[idx]
        .replace("{entity}", entity_label)
        .replace("{relation}", relation)
}

fn call_turn(
    g: &KnowledgeGraph,
    think: Option<String>,
    verb: ToolVerb,
    entity: &str,
    relation: Option<&str>,
) -> Turn {
    let raw = match relation {
        Some(r) => format!("{verb}({entity}, {r})"),
        None => format!("{verb}({entity})"),
    };
    let response = respond::execute(g, verb, entity, relation, respond::DEFAULT_RESPONSE_CAP);
    Turn {
        think,
        call: Some(parse_call(&raw)),
        response_lines: Some(response.lines),
    }
}

/// Builds the rule-based gold-path trajectory for one record: per hop, a
/// templated think span, a relation-listing call on the hop head, then the
/// entity fetch along the gold relation, all executed against the graph so
/// every response contains the next entity on the path. Relation listings
/// are dropped from later hops when the five-call budget requires it.
pub fn gen_gold_trajectory(
    gold: &GoldRecord,
    g: &KnowledgeGraph,
    template_seed: u64,
) -> Result<Trajectory, SimError> {
    if gold.chain.is_empty() {
        return Err(SimError::EmptyChain(gold.qid.clone()));
    }
    let hops = gold.chain.len();
    if hops > MAX_CALLS {
        return Err(SimError::TooManyHops {
            qid: gold.qid.clone(),
            hops,
        });
    }
    let answer = gold
        .answers
        .first()
        .ok_or_else(|| SimError::NoAnswers(gold.qid.clone()))?;

    let mut turns = Vec::new();
    let mut budget = MAX_CALLS;
    for (h, hop) in gold.chain.iter().enumerate() {
        let tails = g.tail_entities(hop.head.as_str(), hop.relation.as_str());
        if !tails.contains(&hop.tail) {
            return Err(SimError::ChainNotExecutable {
                qid: gold.qid.clone(),
                hop: h,
            });
        }
        let think = fill_template(
            template_seed,
            h,
            g.label_of(hop.head.as_str()),
            hop.relation.as_str(),
        );
        let remaining_hops = hops - h;
        if budget > remaining_hops {
            turns.push(call_turn(
                g,
                Some(think),
                ToolVerb::GetTailRelations,
                hop.head.as_str(),
                None,
            ));
            budget -= 1;
            turns.push(call_turn(
                g,
                None,
                ToolVerb::GetTailEntities,
                hop.head.as_str(),
                Some(hop.relation.as_str()),
            ));
        } else {
            turns.push(call_turn(
                g,
                Some(think),
                ToolVerb::GetTailEntities,
                hop.head.as_str(),
                Some(hop.relation.as_str()),
            ));
        }
        budget -= 1;
    }
    Ok(Trajectory {
        question_id: gold.qid.clone(),
        turns,
        final_answer_raw: Some(answer.clone()),
        flags: Default::default(),
        raw_bytes: 0,
    }
    .finalize(&ParseOptions::default()))
}

/// The scripted policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScriptedPolicy {
    /// Follows the gold chain (the generator above).
    GoldPath { template_seed: u64 },
    /// One entity fetch on the first seed with its first listed relation;
    /// the answer quotes the first returned line verbatim.
    QuoteAndStop,
    /// One ritual relation listing; the answer comes from a memory table.
    RitualSingleCall {
        answers: BTreeMap<String, String>,
        fallback: String,
    },
    /// Gold-path trajectory with a fraction of calls relocated inside
    /// think spans.
    FormatDrift { severity: f64, template_seed: u64 },
    /// No calls at all; the answer comes from a memory table.
    MemoryAnswer {
        answers: BTreeMap<String, String>,
        fallback: String,
    },
}

impl ScriptedPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ScriptedPolicy::GoldPath { .. } => "gold-path",
            ScriptedPolicy::QuoteAndStop => "quote-and-stop",
            ScriptedPolicy::RitualSingleCall { .. } => "ritual-single-call",
            ScriptedPolicy::FormatDrift { .. } => "format-drift",
            ScriptedPolicy::MemoryAnswer { .. } => "memory-answer",
        }
    }

    /// Policy with default parameters by registry name.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gold-path" => Some(ScriptedPolicy::GoldPath { template_seed: 0 }),
            "quote-and-stop" => Some(ScriptedPolicy::QuoteAndStop),
            "ritual-single-call" => Some(ScriptedPolicy::RitualSingleCall {
                answers: BTreeMap::new(),
                fallback: "unknown".into(),
            }),
            "format-drift" => Some(ScriptedPolicy::FormatDrift {
                severity: 0.5,
                template_seed: 0,
            }),
            "memory-answer" => Some(ScriptedPolicy::MemoryAnswer {
                answers: BTreeMap::new(),
                fallback: "unknown".into(),
            }),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 5] = [
        "gold-path",
        "quote-and-stop",
        "ritual-single-call",
        "format-drift",
        "memory-answer",
    ];
}

fn first_seed(gold: &GoldRecord) -> Result<&str, SimError> {
    gold.seeds
        .first()
        .map(|e| e.as_str())
        .ok_or_else(|| SimError::NoSeeds(gold.qid.clone()))
}

/// Runs one scripted policy on one question.
pub fn run_policy(
    policy: &ScriptedPolicy,
    gold: &GoldRecord,
    g: &KnowledgeGraph,
) -> Result<Trajectory, SimError> {
    let opts = ParseOptions::default();
    let traj = match policy {
        ScriptedPolicy::GoldPath { template_seed } => {
            return gen_gold_trajectory(gold, g, *template_seed)
        }
        ScriptedPolicy::QuoteAndStop => {
            let seed = first_seed(gold)?;
            let relation = g
                .tail_relations(seed)
                .first()
                .map(|r| r.as_str().to_string())
                .unwrap_or_else(|| "unknown.relation".to_string());
            let turn = call_turn(g, None, ToolVerb::GetTailEntities, seed, Some(&relation));
            let answer = turn
                .response_lines
                .as_ref()
                .and_then(|lines| lines.first())
                .cloned()
                .unwrap_or_default();
            Trajectory {
                question_id: gold.qid.clone(),
                turns: vec![turn],
                final_answer_raw: Some(answer),
                flags: Default::default(),
                raw_bytes: 0,
            }
        }
        ScriptedPolicy::RitualSingleCall { answers, fallback } => {
            let seed = first_seed(gold)?;
            let think = format!("Let me check what is known about {}.", g.label_of(seed));
            let turn = call_turn(g, Some(think), ToolVerb::GetTailRelations, seed, None);
            let answer = answers.get(&gold.qid).cloned().unwrap_or_else(|| fallback.clone());
            Trajectory {
                question_id: gold.qid.clone(),
                turns: vec![turn],
                final_answer_raw: Some(answer),
                flags: Default::default(),
                raw_bytes: 0,
            }
        }
        ScriptedPolicy::FormatDrift {
            severity,
            template_seed,
        } => {
            let mut traj = gen_gold_trajectory(gold, g, *template_seed)?;
            let n_calls = traj.call_count();
            let drift = ((severity.clamp(0.0, 1.0)) * n_calls as f64).round() as usize;
            let mut drifted = 0usize;
            for turn in traj.turns.iter_mut() {
                if drifted >= drift {
                    break;
                }
                if let Some(call) = turn.call.take() {
                    let think = turn.think.take().unwrap_or_default();
                    turn.think =
                        Some(format!("{think} <search>{}</search>", call.raw_text));
                    turn.response_lines = None;
                    drifted += 1;
                }
            }
            traj.raw_bytes = 0;
            traj
        }
        ScriptedPolicy::MemoryAnswer { answers, fallback } => {
            let answer = answers.get(&gold.qid).cloned().unwrap_or_else(|| fallback.clone());
            Trajectory {
                question_id: gold.qid.clone(),
                turns: vec![],
                final_answer_raw: Some(answer),
                flags: Default::default(),
                raw_bytes: 0,
            }
        }
    };
    Ok(traj.finalize(&opts))
}

/// A fully scored simulated run.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trajectories: Vec<Trajectory>,
    pub report: RunReport,
    pub records: Vec<ScoredRecord>,
}

/// Runs a policy over every gold record and scores the result under the
/// given rung — the side-by-side reward-decomposition harness.
pub fn simulate_run(
    policy: &ScriptedPolicy,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    rung: Rung,
) -> Result<SimOutcome, SimError> {
    let trajectories: Vec<Trajectory> = golds
        .records()
        .iter()
        .map(|gold| run_policy(policy, gold, g))
        .collect::<Result<_, _>>()?;
    let (report, records) = score_run(&trajectories, golds, g, rung)?;
    Ok(SimOutcome {
        trajectories,
        report,
        records,
    })
}

/// Why a trajectory was rejected by the self-distillation filter; the
/// first failing predicate wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    EmFail,
    NotProductive,
    FormatInvalid,
}

/// Filter outcome: kept and rejected partition the input.
#[derive(Debug, Clone)]
pub struct DistillFilterResult {
    pub kept: Vec<Trajectory>,
    pub rejected: Vec<(Trajectory, RejectReason)>,
    pub yield_fraction: f64,
}

/// First failing filter predicate for one trajectory, `None` when it
/// passes all three: exact match, tool productivity, answer envelope.
pub fn distill_verdict(traj: &Trajectory, gold: &GoldRecord) -> Option<RejectReason> {
    let norm_golds = gold.normalized_answers();
    let em = !norm_golds.is_empty()
        && exact_match(&traj.normalized_answer(), &norm_golds).unwrap_or(0.0) == 1.0;
    if !em {
        Some(RejectReason::EmFail)
    } else if !entity_in_answer(traj) {
        Some(RejectReason::NotProductive)
    } else if traj.flags.contains(&FormatFlag::MissingAnswerEnvelope) {
        Some(RejectReason::FormatInvalid)
    } else {
        None
    }
}

/// Keeps trajectories that are simultaneously exact-match correct,
/// tool-productive (at least one returned entity quoted in the answer),
/// and format-valid (answer envelope present).
pub fn self_distill_filter(
    trajs: Vec<Trajectory>,
    golds: &GoldSet,
) -> Result<DistillFilterResult, SimError> {
    let total = trajs.len();
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for traj in trajs {
        let gold = golds.require(&traj.question_id)?;
        match distill_verdict(&traj, gold) {
            None => kept.push(traj),
            Some(reason) => rejected.push((traj, reason)),
        }
    }
    let yield_fraction = if total == 0 {
        0.0
    } else {
        kept.len() as f64 / total as f64
    };
    Ok(DistillFilterResult {
        kept,
        rejected,
        yield_fraction,
    })
}
