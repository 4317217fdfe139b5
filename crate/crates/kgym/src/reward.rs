//! Reward components and ladder composites as pure scoring functions.
//!
//! Every component maps into [0,1]. Outcome-style components (`em`, `f1`,
//! `out`, `ans`) take a pre-normalized answer and gold set and take the max
//! over golds; trajectory components (`valid`, `coh`, `tool_type`,
//! `tool_usage`, `retrv`) never see the gold record — that split is
//! enforced by the function signatures. Per-call fractions define 0/0 := 0
//! so the absence of calls is never rewarded.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gold::GoldRecord;
use crate::text;
use crate::trajectory::{Trajectory, Turn};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardError {
    #[error("gold record has no usable answers")]
    EmptyGolds,
    #[error("unknown reward rung {0:?}")]
    UnknownRung(String),
}

/// The ten scoring components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Em,
    F1,
    Out,
    Valid,
    Path,
    Coh,
    ToolType,
    ToolUsage,
    Retrv,
    Ans,
}

impl Component {
    pub fn key(self) -> &'static str {
        match self {
            Component::Em => "em",
            Component::F1 => "f1",
            Component::Out => "out",
            Component::Valid => "valid",
            Component::Path => "path",
            Component::Coh => "coh",
            Component::ToolType => "tool_type",
            Component::ToolUsage => "tool_usage",
            Component::Retrv => "retrv",
            Component::Ans => "ans",
        }
    }
}

fn token_counts(s: &str) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for tok in s.split_whitespace() {
        *counts.entry(tok).or_insert(0) += 1;
    }
    counts
}

fn multiset_overlap(a: &HashMap<&str, usize>, b: &HashMap<&str, usize>) -> usize {
    a.iter()
        .map(|(tok, &n)| n.min(b.get(tok).copied().unwrap_or(0)))
        .sum()
}

fn require_golds(golds: &[String]) -> Result<(), RewardError> {
    if golds.is_empty() {
        Err(RewardError::EmptyGolds)
    } else {
        Ok(())
    }
}

/// Exact match: 1 iff the answer equals any gold (both pre-normalized).
pub fn exact_match(answer: &str, golds: &[String]) -> Result<f64, RewardError> {
    require_golds(golds)?;
    Ok(golds.iter().any(|g| g == answer) as u8 as f64)
}

/// Token-overlap F1 against the best gold; 0 when either side is empty.
pub fn token_f1(answer: &str, golds: &[String]) -> Result<f64, RewardError> {
    require_golds(golds)?;
    let a = token_counts(answer);
    let a_len: usize = a.values().sum();
    let mut best = 0.0f64;
    for gold in golds {
        let g = token_counts(gold);
        let g_len: usize = g.values().sum();
        if a_len == 0 || g_len == 0 {
            continue;
        }
        let overlap = multiset_overlap(&a, &g);
        if overlap == 0 {
            continue;
        }
        let p = overlap as f64 / a_len as f64;
        let r = overlap as f64 / g_len as f64;
        best = best.max(2.0 * p * r / (p + r));
    }
    Ok(best)
}

/// Outcome reward: `0.5·em + 0.5·f1`.
pub fn outcome(answer: &str, golds: &[String]) -> Result<f64, RewardError> {
    Ok(0.5 * exact_match(answer, golds)? + 0.5 * token_f1(answer, golds)?)
}

/// Lenient answer reward: `0.5·recall(gold tokens in answer) + 0.5·f1`.
pub fn lenient_answer(answer: &str, golds: &[String]) -> Result<f64, RewardError> {
    require_golds(golds)?;
    let a = token_counts(answer);
    let mut best_recall = 0.0f64;
    for gold in golds {
        let g = token_counts(gold);
        let g_len: usize = g.values().sum();
        if g_len == 0 {
            continue;
        }
        best_recall = best_recall.max(multiset_overlap(&a, &g) as f64 / g_len as f64);
    }
    Ok(0.5 * best_recall + 0.5 * token_f1(answer, golds)?)
}

/// Fraction of calls that parse against the four-verb schema.
pub fn valid_call_fraction(traj: &Trajectory) -> f64 {
    let total = traj.call_count();
    if total == 0 {
        return 0.0;
    }
    traj.calls().filter(|c| c.parse_ok()).count() as f64 / total as f64
}

/// 1 iff any parsed call carries a relation argument on the gold chain.
pub fn gold_path_hit(traj: &Trajectory, gold: &GoldRecord) -> f64 {
    let chain: HashSet<&str> = gold.chain_relations().iter().map(|r| r.as_str()).collect();
    let hit = traj
        .parsed_calls()
        .filter_map(|args| args.relation.as_deref())
        .any(|rel| chain.contains(rel));
    hit as u8 as f64
}

/// Mean, over turns holding both a think span and a call, of the normalized
/// LCS token ratio `2·lcs/(|think| + |call|)`; 0 when no such turn exists.
pub fn think_call_coherence(traj: &Trajectory) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for turn in &traj.turns {
        let (Some(think), Some(call)) = (&turn.think, &turn.call) else {
            continue;
        };
        let a: Vec<&str> = think.split_whitespace().collect();
        let b: Vec<&str> = call.raw_text.split_whitespace().collect();
        let denom = a.len() + b.len();
        if denom > 0 {
            sum += 2.0 * text::lcs_len(&a, &b) as f64 / denom as f64;
        }
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Distinct verbs covered by parsed calls, scaled by the four-verb set.
pub fn verb_coverage(traj: &Trajectory) -> f64 {
    let verbs: HashSet<_> = traj.parsed_calls().map(|args| args.verb).collect();
    verbs.len() as f64 / 4.0
}

/// Fraction of calls whose inlined response is non-empty.
pub fn nonempty_response_fraction(traj: &Trajectory) -> f64 {
    let total = traj.call_count();
    if total == 0 {
        return 0.0;
    }
    traj.call_turns()
        .filter(|(turn, _)| turn.response_nonempty())
        .count() as f64
        / total as f64
}

/// True iff `line`, normalized, is a non-empty contiguous substring of the
/// normalized answer.
pub fn line_in_answer(line: &str, normalized_answer: &str) -> bool {
    let n = text::normalize(line);
    !n.is_empty() && normalized_answer.contains(&n)
}

/// A call is productive iff its response is non-empty and at least one
/// returned line appears (normalized) inside the final answer.
pub fn call_is_productive(turn: &Turn, normalized_answer: &str) -> bool {
    turn.response_nonempty()
        && turn
            .response_lines
            .iter()
            .flatten()
            .any(|line| line_in_answer(line, normalized_answer))
}

/// Fraction of calls that are productive in the quote-back sense.
pub fn retrieval_contribution(traj: &Trajectory) -> f64 {
    let total = traj.call_count();
    if total == 0 {
        return 0.0;
    }
    let answer = traj.normalized_answer();
    traj.call_turns()
        .filter(|(turn, _)| call_is_productive(turn, &answer))
        .count() as f64
        / total as f64
}

/// The six reward rungs. `R-binary-SR` shares `R-binary`'s function and
/// `R-toolverbs-KL` shares `R-toolverbs`'s: those pairs differ only in
/// trainer-side settings that live outside the reward boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rung {
    #[serde(rename = "R-binary")]
    Binary,
    #[serde(rename = "R-binary-SR")]
    BinarySr,
    #[serde(rename = "R-stepwise")]
    Stepwise,
    #[serde(rename = "R-toolverbs")]
    Toolverbs,
    #[serde(rename = "R-toolverbs-KL")]
    ToolverbsKl,
    #[serde(rename = "R-selfV")]
    SelfV,
}

impl Rung {
    pub const ALL: [Rung; 6] = [
        Rung::Binary,
        Rung::BinarySr,
        Rung::Stepwise,
        Rung::Toolverbs,
        Rung::ToolverbsKl,
        Rung::SelfV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rung::Binary => "R-binary",
            Rung::BinarySr => "R-binary-SR",
            Rung::Stepwise => "R-stepwise",
            Rung::Toolverbs => "R-toolverbs",
            Rung::ToolverbsKl => "R-toolverbs-KL",
            Rung::SelfV => "R-selfV",
        }
    }

    /// Resolves a rung by name; the middle-dot spelling `R-toolverbs·KL`
    /// is accepted as an alias for `R-toolverbs-KL`.
    pub fn from_name(name: &str) -> Option<Self> {
        if name == "R-toolverbs\u{b7}KL" {
            return Some(Rung::ToolverbsKl);
        }
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    /// Component weights; each rung's weights sum to 1.
    pub fn weights(self) -> &'static [(Component, f64)] {
        match self {
            Rung::Binary | Rung::BinarySr => &[(Component::Em, 0.5), (Component::F1, 0.5)],
            Rung::Stepwise => &[
                (Component::Out, 0.25),
                (Component::Valid, 0.25),
                (Component::Path, 0.25),
                (Component::Coh, 0.25),
            ],
            Rung::Toolverbs | Rung::ToolverbsKl => &[
                (Component::Out, 0.25),
                (Component::ToolType, 0.5),
                (Component::ToolUsage, 0.25),
            ],
            Rung::SelfV => &[
                (Component::Ans, 0.25),
                (Component::ToolType, 0.5),
                (Component::Retrv, 0.25),
            ],
        }
    }
}

/// Per-component raw values plus the weighted composite for one rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub rung: String,
    pub components: BTreeMap<String, f64>,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn component(&self, c: Component) -> Option<f64> {
        self.components.get(c.key()).copied()
    }

    /// Component-wise mean of breakdowns from the same rung.
    pub fn mean_of(breakdowns: &[RewardBreakdown]) -> Option<RewardBreakdown> {
        let first = breakdowns.first()?;
        let n = breakdowns.len() as f64;
        let mut components: BTreeMap<String, f64> = BTreeMap::new();
        for b in breakdowns {
            for (k, v) in &b.components {
                *components.entry(k.clone()).or_insert(0.0) += v;
            }
        }
        for v in components.values_mut() {
            *v /= n;
        }
        let total = breakdowns.iter().map(|b| b.total).sum::<f64>() / n;
        Some(RewardBreakdown {
            rung: first.rung.clone(),
            components,
            total,
        })
    }
}

fn component_value(
    c: Component,
    traj: &Trajectory,
    answer: &str,
    golds: &[String],
    gold: &GoldRecord,
) -> Result<f64, RewardError> {
    Ok(match c {
        Component::Em => exact_match(answer, golds)?,
        Component::F1 => token_f1(answer, golds)?,
        Component::Out => outcome(answer, golds)?,
        Component::Ans => lenient_answer(answer, golds)?,
        Component::Valid => valid_call_fraction(traj),
        Component::Path => gold_path_hit(traj, gold),
        Component::Coh => think_call_coherence(traj),
        Component::ToolType => verb_coverage(traj),
        Component::ToolUsage => nonempty_response_fraction(traj),
        Component::Retrv => retrieval_contribution(traj),
    })
}

/// Scores one trajectory under one rung. The total is exactly the dot
/// product of the rung's declared weights and the component values.
pub fn score(rung: Rung, traj: &Trajectory, gold: &GoldRecord) -> Result<RewardBreakdown, RewardError> {
    let answer = traj.normalized_answer();
    let golds = gold.normalized_answers();
    let mut components = BTreeMap::new();
    let mut total = 0.0;
    for &(c, w) in rung.weights() {
        let v = component_value(c, traj, &answer, &golds, gold)?;
        components.insert(c.key().to_string(), v);
        total += w * v;
    }
    Ok(RewardBreakdown {
        rung: rung.name().to_string(),
        components,
        total,
    })
}

/// Scores by registry name, e.g. `--reward R-selfV`.
pub fn score_by_name(
    rung_name: &str,
    traj: &Trajectory,
    gold: &GoldRecord,
) -> Result<RewardBreakdown, RewardError> {
    let rung =
        Rung::from_name(rung_name).ok_or_else(|| RewardError::UnknownRung(rung_name.into()))?;
    score(rung, traj, gold)
}
