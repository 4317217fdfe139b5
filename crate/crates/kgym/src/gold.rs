//! Gold annotations: per-question answer sets and the ordered triple chain
//! from question seed to answer.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId, Triple};
use crate::text;

/// One annotated question: gold answers plus the ordered hop chain and the
/// seed entities the question is grounded in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldRecord {
    pub qid: String,
    #[serde(default)]
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default)]
    pub chain: Vec<Triple>,
    #[serde(default)]
    pub seeds: Vec<EntityId>,
}

impl GoldRecord {
    /// Gold answers after normalization, with empties dropped.
    pub fn normalized_answers(&self) -> Vec<String> {
        self.answers
            .iter()
            .map(|a| text::normalize(a))
            .filter(|a| !a.is_empty())
            .collect()
    }

    pub fn chain_relations(&self) -> Vec<&RelationId> {
        self.chain.iter().map(|t| &t.relation).collect()
    }

    /// Entities on the gold chain, heads and tails, in hop order.
    pub fn chain_entities(&self) -> Vec<&EntityId> {
        let mut out = Vec::with_capacity(self.chain.len() * 2);
        for t in &self.chain {
            out.push(&t.head);
            out.push(&t.tail);
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("gold line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("duplicate qid {0:?}")]
    DuplicateQid(String),
    #[error("unresolved qid {0:?}")]
    UnresolvedQid(String),
}

/// Ordered gold records with qid lookup.
#[derive(Debug, Clone, Default)]
pub struct GoldSet {
    records: Vec<GoldRecord>,
    by_qid: HashMap<String, usize>,
}

impl GoldSet {
    pub fn new(records: Vec<GoldRecord>) -> Result<Self, GoldError> {
        let mut by_qid = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_qid.insert(r.qid.clone(), i).is_some() {
                return Err(GoldError::DuplicateQid(r.qid.clone()));
            }
        }
        Ok(Self { records, by_qid })
    }

    /// Reads JSON-lines gold records, one object per line.
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, GoldError> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: GoldRecord =
                serde_json::from_str(&line).map_err(|source| GoldError::Parse {
                    line: idx + 1,
                    source,
                })?;
            records.push(rec);
        }
        Self::new(records)
    }

    pub fn get(&self, qid: &str) -> Option<&GoldRecord> {
        self.by_qid.get(qid).map(|&i| &self.records[i])
    }

    pub fn require(&self, qid: &str) -> Result<&GoldRecord, GoldError> {
        self.get(qid)
            .ok_or_else(|| GoldError::UnresolvedQid(qid.to_string()))
    }

    pub fn records(&self) -> &[GoldRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let line = r#"{"qid":"q1","question":"who?","answers":["Judaism"],"chain":[["m.01","people.person.religion","m.02"]],"seeds":["m.01"]}"#;
        let set = GoldSet::from_jsonl(line.as_bytes()).unwrap();
        let rec = set.require("q1").unwrap();
        assert_eq!(rec.normalized_answers(), ["judaism"]);
        assert_eq!(rec.chain.len(), 1);
        assert_eq!(rec.chain[0].relation.as_str(), "people.person.religion");
        let back = serde_json::to_string(rec).unwrap();
        assert!(back.contains(r#"["m.01","people.person.religion","m.02"]"#));
    }

    #[test]
    fn duplicate_qids_rejected() {
        let lines = "{\"qid\":\"q\",\"answers\":[\"x\"]}\n{\"qid\":\"q\",\"answers\":[\"y\"]}\n";
        assert!(matches!(
            GoldSet::from_jsonl(lines.as_bytes()),
            Err(GoldError::DuplicateQid(_))
        ));
    }
}
