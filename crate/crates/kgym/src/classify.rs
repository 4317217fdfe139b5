//! Seven-category trajectory classification.
//!
//! Classification is a total function: every trajectory lands in exactly
//! one category. The decision tree first splits on normalized exact match,
//! then on tool involvement. On the error side, `tool-misuse` is checked
//! before `kg-incomplete`, so a malformed call with otherwise-empty
//! responses counts as misuse. A missing answer envelope with well-formed
//! calls routes to `wrong-answer` (the envelope flag stays on the
//! trajectory for auditing).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::gold::GoldRecord;
use crate::kg::KnowledgeGraph;
use crate::reward::{call_is_productive, exact_match};
use crate::text;
use crate::trajectory::Trajectory;

/// The closed seven-category outcome set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "correct-via-tool")]
    CorrectViaTool,
    #[serde(rename = "correct-via-memory")]
    CorrectViaMemory,
    #[serde(rename = "correct-no-tool")]
    CorrectNoTool,
    #[serde(rename = "wrong-no-tool")]
    WrongNoTool,
    #[serde(rename = "kg-incomplete")]
    KgIncomplete,
    #[serde(rename = "tool-misuse")]
    ToolMisuse,
    #[serde(rename = "wrong-answer")]
    WrongAnswer,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::CorrectViaTool,
        Category::CorrectViaMemory,
        Category::CorrectNoTool,
        Category::WrongNoTool,
        Category::KgIncomplete,
        Category::ToolMisuse,
        Category::WrongAnswer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::CorrectViaTool => "correct-via-tool",
            Category::CorrectViaMemory => "correct-via-memory",
            Category::CorrectNoTool => "correct-no-tool",
            Category::WrongNoTool => "wrong-no-tool",
            Category::KgIncomplete => "kg-incomplete",
            Category::ToolMisuse => "tool-misuse",
            Category::WrongAnswer => "wrong-answer",
        }
    }

    /// The error categories, i.e. the normalized non-EM side of the tree.
    pub fn is_error(self) -> bool {
        matches!(
            self,
            Category::WrongNoTool
                | Category::KgIncomplete
                | Category::ToolMisuse
                | Category::WrongAnswer
        )
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// True iff some call's response contains a line whose normalized form is a
/// substring of the normalized final answer — the same predicate that makes
/// a call productive for the retrieval reward.
pub fn entity_in_answer(traj: &Trajectory) -> bool {
    let answer = traj.normalized_answer();
    traj.call_turns()
        .any(|(turn, _)| call_is_productive(turn, &answer))
}

/// Normalized forms of everything the gold chain names: entity labels,
/// entity ids, and relation names.
fn gold_subgraph_surface(gold: &GoldRecord, g: &KnowledgeGraph) -> HashSet<String> {
    let mut surface = HashSet::new();
    for e in gold.chain_entities() {
        surface.insert(text::normalize(g.label_of(e.as_str())));
        surface.insert(text::normalize(e.as_str()));
    }
    for r in gold.chain_relations() {
        surface.insert(text::normalize(r.as_str()));
    }
    surface.remove("");
    surface
}

/// Assigns exactly one category to a parsed trajectory.
pub fn classify(traj: &Trajectory, gold: &GoldRecord, g: &KnowledgeGraph) -> Category {
    let answer = traj.normalized_answer();
    let golds = gold.normalized_answers();
    let em = !golds.is_empty() && exact_match(&answer, &golds).unwrap_or(0.0) == 1.0;
    let has_call = traj.call_count() > 0;

    if em {
        if !has_call {
            Category::CorrectNoTool
        } else if entity_in_answer(traj) {
            Category::CorrectViaTool
        } else {
            Category::CorrectViaMemory
        }
    } else {
        if !has_call {
            return Category::WrongNoTool;
        }
        if traj.calls().any(|c| !c.parse_ok()) {
            return Category::ToolMisuse;
        }
        if traj.final_answer_raw.is_none() {
            return Category::WrongAnswer;
        }
        let all_empty = traj.call_turns().all(|(turn, _)| !turn.response_nonempty());
        if all_empty {
            return Category::KgIncomplete;
        }
        let surface = gold_subgraph_surface(gold, g);
        let disjoint = traj
            .turns
            .iter()
            .flat_map(|t| t.response_lines.iter().flatten())
            .all(|line| !surface.contains(&text::normalize(line)));
        if disjoint {
            Category::KgIncomplete
        } else {
            Category::WrongAnswer
        }
    }
}

/// Strict exact match on raw (un-normalized) surface text, exposed beside
/// the normalized predicate because the two disagree on a small set of
/// trajectories and downstream denominators track both.
pub fn strict_em(traj: &Trajectory, gold: &GoldRecord) -> bool {
    match &traj.final_answer_raw {
        Some(answer) => gold.answers.iter().any(|g| g == answer),
        None => false,
    }
}
