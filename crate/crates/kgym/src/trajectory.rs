//! Transcript grammar: total parsing of raw agent output into structured
//! trajectories.
//!
//! Transcripts interleave four flat, non-nesting tag spans — `<think>`,
//! `<search>`, `<tool_response>`, `<answer>` — scanned left to right with
//! non-greedy close matching. Parsing never fails: every anomaly (drifted
//! tags, unparseable calls, missing answer envelope) is recorded as a format
//! flag instead of an error, because real dumps contain exactly those
//! anomalies and they are what the downstream analyses measure.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The closed four-verb navigation interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolVerb {
    GetTailRelations,
    GetHeadRelations,
    GetTailEntities,
    GetHeadEntities,
}

impl ToolVerb {
    pub const ALL: [ToolVerb; 4] = [
        ToolVerb::GetTailRelations,
        ToolVerb::GetHeadRelations,
        ToolVerb::GetTailEntities,
        ToolVerb::GetHeadEntities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToolVerb::GetTailRelations => "get_tail_relations",
            ToolVerb::GetHeadRelations => "get_head_relations",
            ToolVerb::GetTailEntities => "get_tail_entities",
            ToolVerb::GetHeadEntities => "get_head_entities",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Entity-fetch verbs take `(entity, relation)`; listing verbs take
    /// `(entity)` alone.
    pub fn takes_relation(self) -> bool {
        matches!(self, ToolVerb::GetTailEntities | ToolVerb::GetHeadEntities)
    }
}

impl fmt::Display for ToolVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Successfully parsed call arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallArgs {
    pub verb: ToolVerb,
    pub entity: String,
    pub relation: Option<String>,
}

/// One `<search>` span: the raw text always, plus arguments when the text
/// matches the four-verb schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub raw_text: String,
    pub args: Option<CallArgs>,
}

impl ToolCall {
    pub fn parse_ok(&self) -> bool {
        self.args.is_some()
    }
}

/// Parses `verb(entity)` / `verb(entity, relation)` with whitespace around
/// arguments tolerated. Arity must match the verb; arguments must be
/// non-empty whitespace-free tokens. Failure is encoded, never raised.
pub fn parse_call(text: &str) -> ToolCall {
    let raw_text = text.to_string();
    let args = parse_call_args(text);
    ToolCall { raw_text, args }
}

fn parse_call_args(text: &str) -> Option<CallArgs> {
    let trimmed = text.trim();
    let open = trimmed.find('(')?;
    let verb = ToolVerb::from_name(trimmed[..open].trim())?;
    let rest = &trimmed[open + 1..];
    let inner = rest.strip_suffix(')')?;
    // a ')' may only appear as the final character
    if inner.contains(')') || inner.contains('(') {
        return None;
    }
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    let token = |s: &str| -> Option<String> {
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            None
        } else {
            Some(s.to_string())
        }
    };
    match (verb.takes_relation(), parts.as_slice()) {
        (false, [entity]) => Some(CallArgs {
            verb,
            entity: token(entity)?,
            relation: None,
        }),
        (true, [entity, relation]) => Some(CallArgs {
            verb,
            entity: token(entity)?,
            relation: Some(token(relation)?),
        }),
        _ => None,
    }
}

/// One think/call/response step of a trajectory. A response can only be
/// attached to a call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub think: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call: Option<ToolCall>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_lines: Option<Vec<String>>,
}

impl Turn {
    fn is_empty(&self) -> bool {
        self.think.is_none() && self.call.is_none() && self.response_lines.is_none()
    }

    pub fn response_nonempty(&self) -> bool {
        self.response_lines.as_ref().is_some_and(|l| !l.is_empty())
    }
}

/// Format anomalies surfaced by parsing instead of errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatFlag {
    MissingAnswerEnvelope,
    SearchInsideThink,
    UnparsedCall,
    Overlong,
    DegenerateLoop,
}

/// Knobs for flag computation.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Transcripts larger than this many bytes get the `overlong` flag.
    pub overlong_bytes: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            overlong_bytes: 65536,
        }
    }
}

/// A parsed transcript: ordered turns, the final answer (last `<answer>`
/// envelope wins), and the format flags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(default)]
    pub question_id: String,
    pub turns: Vec<Turn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_answer_raw: Option<String>,
    pub flags: BTreeSet<FormatFlag>,
    #[serde(default)]
    pub raw_bytes: usize,
}

impl Trajectory {
    pub fn with_qid(mut self, qid: impl Into<String>) -> Self {
        self.question_id = qid.into();
        self
    }

    pub fn calls(&self) -> impl Iterator<Item = &ToolCall> {
        self.turns.iter().filter_map(|t| t.call.as_ref())
    }

    pub fn call_count(&self) -> usize {
        self.calls().count()
    }

    /// Calls whose text matched the four-verb schema.
    pub fn parsed_calls(&self) -> impl Iterator<Item = &CallArgs> {
        self.calls().filter_map(|c| c.args.as_ref())
    }

    /// Turns that carry a call, paired with that call.
    pub fn call_turns(&self) -> impl Iterator<Item = (&Turn, &ToolCall)> {
        self.turns.iter().filter_map(|t| t.call.as_ref().map(|c| (t, c)))
    }

    /// Normalized final answer; empty when the envelope is missing.
    pub fn normalized_answer(&self) -> String {
        crate::text::normalize(self.final_answer_raw.as_deref().unwrap_or(""))
    }

    /// Recomputes the flag set from the parsed structure. `overlong` uses
    /// the recorded raw transcript size.
    pub fn recompute_flags(&self, opts: &ParseOptions) -> BTreeSet<FormatFlag> {
        let mut flags = BTreeSet::new();
        if self.final_answer_raw.is_none() {
            flags.insert(FormatFlag::MissingAnswerEnvelope);
        }
        if self
            .turns
            .iter()
            .filter_map(|t| t.think.as_deref())
            .any(|think| think.contains("<search>"))
        {
            flags.insert(FormatFlag::SearchInsideThink);
        }
        if self.calls().any(|c| !c.parse_ok()) {
            flags.insert(FormatFlag::UnparsedCall);
        }
        let raw: Vec<&str> = self.calls().map(|c| c.raw_text.trim()).collect();
        if raw.windows(3).any(|w| w[0] == w[1] && w[1] == w[2]) {
            flags.insert(FormatFlag::DegenerateLoop);
        }
        if self.raw_bytes > opts.overlong_bytes {
            flags.insert(FormatFlag::Overlong);
        }
        flags
    }

    /// Refreshes `flags` in place (used after programmatic construction).
    pub fn finalize(mut self, opts: &ParseOptions) -> Self {
        if self.raw_bytes == 0 {
            self.raw_bytes = render(&self).len();
        }
        self.flags = self.recompute_flags(opts);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TagKind {
    Think,
    Search,
    ToolResponse,
    Answer,
}

const TAGS: [(TagKind, &str, &str); 4] = [
    (TagKind::Think, "<think>", "</think>"),
    (TagKind::Search, "<search>", "</search>"),
    (TagKind::ToolResponse, "<tool_response>", "</tool_response>"),
    (TagKind::Answer, "<answer>", "</answer>"),
];

/// Total transcript parser. Spans are extracted by first-match
/// left-to-right scanning with non-greedy close tags; an unclosed open tag
/// consumes the rest of the input as its span.
pub fn parse_transcript(text: &str) -> Trajectory {
    parse_transcript_with(text, &ParseOptions::default())
}

pub fn parse_transcript_with(text: &str, opts: &ParseOptions) -> Trajectory {
    let mut spans: Vec<(TagKind, &str)> = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let next = TAGS
            .iter()
            .filter_map(|(kind, open, close)| {
                text[pos..].find(open).map(|at| (pos + at, *kind, *open, *close))
            })
            .min_by_key(|(at, ..)| *at);
        let Some((at, kind, open, close)) = next else {
            break;
        };
        let content_start = at + open.len();
        match text[content_start..].find(close) {
            Some(rel) => {
                spans.push((kind, &text[content_start..content_start + rel]));
                pos = content_start + rel + close.len();
            }
            None => {
                spans.push((kind, &text[content_start..]));
                pos = text.len();
            }
        }
    }

    let mut turns: Vec<Turn> = Vec::new();
    let mut cur = Turn::default();
    let mut answer: Option<&str> = None;
    let flush = |cur: &mut Turn, turns: &mut Vec<Turn>| {
        if !cur.is_empty() {
            turns.push(std::mem::take(cur));
        }
    };
    for (kind, content) in spans {
        match kind {
            TagKind::Think => {
                if cur.think.is_some() || cur.call.is_some() {
                    flush(&mut cur, &mut turns);
                }
                cur.think = Some(content.to_string());
            }
            TagKind::Search => {
                if cur.call.is_some() {
                    flush(&mut cur, &mut turns);
                }
                cur.call = Some(parse_call(content));
            }
            TagKind::ToolResponse => {
                // responses attach to the pending call; orphan responses
                // cannot be attributed and are dropped
                if cur.call.is_some() && cur.response_lines.is_none() {
                    cur.response_lines = Some(split_response_lines(content));
                }
            }
            TagKind::Answer => answer = Some(content),
        }
    }
    flush(&mut cur, &mut turns);

    let traj = Trajectory {
        question_id: String::new(),
        turns,
        final_answer_raw: answer.map(|a| a.trim().to_string()),
        flags: BTreeSet::new(),
        raw_bytes: text.len(),
    };
    let flags = traj.recompute_flags(opts);
    Trajectory { flags, ..traj }
}

fn split_response_lines(content: &str) -> Vec<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Renders a trajectory back to transcript text. For trajectories that are
/// well-formed by construction, `parse_transcript(render(t))` reproduces
/// the turn structure exactly.
pub fn render(traj: &Trajectory) -> String {
    let mut out = String::new();
    for turn in &traj.turns {
        if let Some(think) = &turn.think {
            out.push_str("<think>");
            out.push_str(think);
            out.push_str("</think>");
        }
        if let Some(call) = &turn.call {
            out.push_str("<search>");
            out.push_str(&call.raw_text);
            out.push_str("</search>");
        }
        if let Some(lines) = &turn.response_lines {
            out.push_str("<tool_response>");
            out.push_str(&lines.join("\n"));
            out.push_str("</tool_response>");
        }
    }
    if let Some(answer) = &traj.final_answer_raw {
        out.push_str("<answer>");
        out.push_str(answer);
        out.push_str("</answer>");
    }
    out
}
