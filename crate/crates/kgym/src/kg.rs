//! Immutable in-memory triple store behind the four navigation verbs.
//!
//! The store is doubly indexed (head→relation→tails and tail→relation→heads)
//! so both travel directions are symmetric lookups. Every query is total:
//! unknown entities and absent relations return an empty list, never an
//! error, and an empty list carries no information about *why* the query
//! missed. Result lists are lexicographically sorted and duplicate-free.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

/// Opaque entity identifier, e.g. `m.0d3k14`. Non-empty, no whitespace,
/// compared byte-exact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct EntityId(String);

/// Dotted relation name, e.g. `people.person.place_of_birth`. Non-empty,
/// compared byte-exact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct RelationId(String);

impl From<EntityId> for String {
    fn from(e: EntityId) -> String {
        e.0
    }
}

impl TryFrom<String> for EntityId {
    type Error = IdError;
    fn try_from(s: String) -> Result<Self, IdError> {
        Self::new(s)
    }
}

impl From<RelationId> for String {
    fn from(r: RelationId) -> String {
        r.0
    }
}

impl TryFrom<String> for RelationId {
    type Error = IdError;
    fn try_from(s: String) -> Result<Self, IdError> {
        Self::new(s)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdError {
    #[error("entity id must be non-empty and contain no whitespace: {0:?}")]
    BadEntity(String),
    #[error("relation id must be non-empty: {0:?}")]
    BadRelation(String),
}

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, IdError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(IdError::BadEntity(id));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl RelationId {
    pub fn new(name: impl Into<String>) -> Result<Self, IdError> {
        let name = name.into();
        if name.is_empty() {
            return Err(IdError::BadRelation(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for RelationId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A single directed edge `head --relation--> tail`. Serializes as the
/// three-element array `[head, relation, tail]` used by the gold file format.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(
    from = "(EntityId, RelationId, EntityId)",
    into = "(EntityId, RelationId, EntityId)"
)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl From<(EntityId, RelationId, EntityId)> for Triple {
    fn from((head, relation, tail): (EntityId, RelationId, EntityId)) -> Self {
        Self { head, relation, tail }
    }
}

impl From<Triple> for (EntityId, RelationId, EntityId) {
    fn from(t: Triple) -> Self {
        (t.head, t.relation, t.tail)
    }
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}: malformed {what}: {content:?}")]
    Malformed {
        line: usize,
        what: &'static str,
        content: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type AdjacencyIndex = HashMap<EntityId, BTreeMap<RelationId, Vec<EntityId>>>;

/// The tool environment: a deduplicated triple set with forward and reverse
/// adjacency indexes and an optional, partial entity→label alias map.
///
/// Immutable once built; all queries are read-only and safe to issue from
/// any number of threads.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    forward: AdjacencyIndex,
    reverse: AdjacencyIndex,
    aliases: HashMap<EntityId, String>,
    triple_count: usize,
    entity_count: usize,
    alias_overwrites: usize,
}

impl KnowledgeGraph {
    /// Builds a graph from in-memory triples and aliases. Duplicate triples
    /// collapse; a repeated alias for one entity keeps the last label and
    /// bumps the overwrite counter.
    pub fn from_triples<T, A>(triples: T, aliases: A) -> Self
    where
        T: IntoIterator<Item = Triple>,
        A: IntoIterator<Item = (EntityId, String)>,
    {
        let set: BTreeSet<Triple> = triples.into_iter().collect();
        let mut forward: AdjacencyIndex = HashMap::new();
        let mut reverse: AdjacencyIndex = HashMap::new();
        let mut entities: HashSet<EntityId> = HashSet::new();
        let triple_count = set.len();
        for t in set {
            entities.insert(t.head.clone());
            entities.insert(t.tail.clone());
            forward
                .entry(t.head.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .push(t.tail.clone());
            reverse
                .entry(t.tail)
                .or_default()
                .entry(t.relation)
                .or_default()
                .push(t.head);
        }
        // BTreeSet iteration orders triples by (head, relation, tail), so the
        // forward lists arrive sorted; reverse lists are grouped by tail and
        // need their own pass.
        for index in [&mut forward, &mut reverse] {
            for by_rel in index.values_mut() {
                for list in by_rel.values_mut() {
                    list.sort();
                    list.dedup();
                }
            }
        }
        let mut alias_map: HashMap<EntityId, String> = HashMap::new();
        let mut alias_overwrites = 0usize;
        for (e, label) in aliases {
            if alias_map.insert(e, label).is_some() {
                alias_overwrites += 1;
            }
        }
        Self {
            forward,
            reverse,
            aliases: alias_map,
            triple_count,
            entity_count: entities.len(),
            alias_overwrites,
        }
    }

    /// Loads a graph from the tab-separated on-disk formats: one
    /// `head<TAB>relation<TAB>tail` triple per line, optionally one
    /// `entity<TAB>label` alias per line. `#`-prefixed lines and blank
    /// lines are skipped. Malformed rows fail with their line number.
    pub fn load<R: BufRead, A: BufRead>(
        triples: R,
        aliases: Option<A>,
    ) -> Result<Self, LoadError> {
        let mut parsed_triples = Vec::new();
        for (idx, line) in triples.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let triple = (|| {
                let head = EntityId::new(fields.next()?.trim()).ok()?;
                let relation = RelationId::new(fields.next()?.trim()).ok()?;
                let tail = EntityId::new(fields.next()?.trim()).ok()?;
                if fields.next().is_some() {
                    return None;
                }
                Some(Triple::new(head, relation, tail))
            })()
            .ok_or(LoadError::Malformed {
                line: idx + 1,
                what: "triple row",
                content: line.clone(),
            })?;
            parsed_triples.push(triple);
        }
        let mut parsed_aliases = Vec::new();
        if let Some(reader) = aliases {
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                let pair = line
                    .split_once('\t')
                    .and_then(|(e, label)| {
                        let label = label.trim();
                        if label.is_empty() {
                            return None;
                        }
                        Some((EntityId::new(e.trim()).ok()?, label.to_string()))
                    })
                    .ok_or(LoadError::Malformed {
                        line: idx + 1,
                        what: "alias row",
                        content: line.clone(),
                    })?;
                parsed_aliases.push(pair);
            }
        }
        Ok(Self::from_triples(parsed_triples, parsed_aliases))
    }

    /// Relations with at least one outgoing edge from `e`; `[]` for unknown
    /// or edgeless entities (the two are indistinguishable by design).
    pub fn tail_relations(&self, e: &str) -> Vec<RelationId> {
        self.forward
            .get(e)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Relations with at least one incoming edge into `e`.
    pub fn head_relations(&self, e: &str) -> Vec<RelationId> {
        self.reverse
            .get(e)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Entities `x` with `(e, r, x)` in the graph.
    pub fn tail_entities(&self, e: &str, r: &str) -> Vec<EntityId> {
        self.forward
            .get(e)
            .and_then(|m| m.get(r))
            .cloned()
            .unwrap_or_default()
    }

    /// Entities `x` with `(x, r, e)` in the graph.
    pub fn head_entities(&self, e: &str, r: &str) -> Vec<EntityId> {
        self.reverse
            .get(e)
            .and_then(|m| m.get(r))
            .cloned()
            .unwrap_or_default()
    }

    /// Surface form of an entity: its alias label when one exists, else the
    /// id itself.
    pub fn label_of<'a>(&'a self, e: &'a str) -> &'a str {
        self.aliases.get(e).map(String::as_str).unwrap_or(e)
    }

    /// Bounded breadth-first reachability: true iff expansion from `seeds`
    /// along both edge directions reaches, within `max_hops` edges, an
    /// entity whose normalized label equals some normalized gold label.
    pub fn solvable_within_hops(
        &self,
        seeds: &[EntityId],
        gold_labels: &[String],
        max_hops: usize,
    ) -> bool {
        let golds: HashSet<String> = gold_labels
            .iter()
            .map(|g| text::normalize(g))
            .filter(|g| !g.is_empty())
            .collect();
        if golds.is_empty() {
            return false;
        }
        let hits = |e: &str| golds.contains(&text::normalize(self.label_of(e)));

        let mut visited: HashSet<&str> = HashSet::new();
        let mut frontier: VecDeque<&str> = VecDeque::new();
        for s in seeds {
            if visited.insert(s.as_str()) {
                if hits(s.as_str()) {
                    return true;
                }
                frontier.push_back(s.as_str());
            }
        }
        for _ in 0..max_hops {
            let mut next = VecDeque::new();
            while let Some(e) = frontier.pop_front() {
                let neighbors = self
                    .forward
                    .get(e)
                    .into_iter()
                    .flat_map(|m| m.values().flatten())
                    .chain(
                        self.reverse
                            .get(e)
                            .into_iter()
                            .flat_map(|m| m.values().flatten()),
                    );
                for n in neighbors {
                    if visited.insert(n.as_str()) {
                        if hits(n.as_str()) {
                            return true;
                        }
                        next.push_back(n.as_str());
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            frontier = next;
        }
        false
    }

    /// Relation vocabulary with per-relation triple counts, sorted by name.
    pub fn relation_vocabulary(&self) -> Vec<(RelationId, usize)> {
        let mut counts: BTreeMap<&RelationId, usize> = BTreeMap::new();
        for by_rel in self.forward.values() {
            for (r, tails) in by_rel {
                *counts.entry(r).or_default() += tails.len();
            }
        }
        counts.into_iter().map(|(r, n)| (r.clone(), n)).collect()
    }

    pub fn triple_count(&self) -> usize {
        self.triple_count
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }

    /// Number of alias rows that overwrote an earlier label for the same
    /// entity during load (last label wins).
    pub fn alias_overwrites(&self) -> usize {
        self.alias_overwrites
    }

    /// Structural self-check: both indexes encode the same triple set, all
    /// result lists are sorted and duplicate-free, and the stored triple
    /// count matches the deduplicated set size.
    pub fn check_invariants(&self) -> Result<(), String> {
        let collect = |index: &AdjacencyIndex, flip: bool| -> BTreeSet<Triple> {
            let mut set = BTreeSet::new();
            for (a, by_rel) in index {
                for (r, bs) in by_rel {
                    let sorted = bs.windows(2).all(|w| w[0] < w[1]);
                    if !sorted {
                        // encode the violation as an unsortable marker
                        return BTreeSet::new();
                    }
                    for b in bs {
                        let (head, tail) = if flip {
                            (b.clone(), a.clone())
                        } else {
                            (a.clone(), b.clone())
                        };
                        set.insert(Triple::new(head, r.clone(), tail));
                    }
                }
            }
            set
        };
        let fwd = collect(&self.forward, false);
        let rev = collect(&self.reverse, true);
        if fwd != rev {
            return Err("forward and reverse indexes disagree".into());
        }
        if fwd.len() != self.triple_count {
            return Err(format!(
                "triple count {} != indexed set size {}",
                self.triple_count,
                fwd.len()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn g0() -> KnowledgeGraph {
        fixtures::g0()
    }

    #[test]
    fn empty_graph_answers_empty() {
        let g = KnowledgeGraph::from_triples([], []);
        assert_eq!(g.triple_count(), 0);
        assert!(g.tail_relations("m.01").is_empty());
        assert!(g.head_entities("m.01", "people.person.religion").is_empty());
    }

    #[test]
    fn g0_has_seven_triples() {
        assert_eq!(g0().triple_count(), 7);
    }

    #[test]
    fn duplicate_triples_collapse() {
        let mut triples = fixtures::g0_triples();
        triples.push(triples[0].clone());
        let g = KnowledgeGraph::from_triples(triples, fixtures::g0_aliases());
        assert_eq!(g.triple_count(), 7);
    }

    #[test]
    fn tail_relations_sorted_and_silent() {
        let g = g0();
        let rels: Vec<String> = g
            .tail_relations("m.01")
            .into_iter()
            .map(|r| r.as_str().to_string())
            .collect();
        assert_eq!(
            rels,
            ["people.person.place_of_birth", "people.person.religion"]
        );
        assert!(g.tail_relations("m.99").is_empty());
        // tail-only entity has no outgoing edges
        assert!(g.tail_relations("m.07").is_empty());
    }

    #[test]
    fn head_relations_mirror() {
        let g = g0();
        let rels: Vec<String> = g
            .head_relations("m.07")
            .into_iter()
            .map(|r| r.as_str().to_string())
            .collect();
        assert_eq!(rels, ["film.film.directed_by"]);
        assert!(g.head_relations("m.01").is_empty());
        assert!(g.head_relations("m.99").is_empty());
    }

    #[test]
    fn tail_entities_examples() {
        let g = g0();
        let tails: Vec<String> = g
            .tail_entities("m.01", "people.person.religion")
            .into_iter()
            .map(|e| e.as_str().to_string())
            .collect();
        assert_eq!(tails, ["m.02"]);
        assert!(g.tail_entities("m.01", "film.actor.film").is_empty());
        let tails: Vec<String> = g
            .tail_entities("m.04", "film.actor.film")
            .into_iter()
            .map(|e| e.as_str().to_string())
            .collect();
        assert_eq!(tails, ["m.05"]);
    }

    #[test]
    fn head_entities_examples() {
        let g = g0();
        let heads: Vec<String> = g
            .head_entities("m.07", "film.film.directed_by")
            .into_iter()
            .map(|e| e.as_str().to_string())
            .collect();
        assert_eq!(heads, ["m.05", "m.09"]);
        let heads: Vec<String> = g
            .head_entities("m.02", "people.person.religion")
            .into_iter()
            .map(|e| e.as_str().to_string())
            .collect();
        assert_eq!(heads, ["m.01"]);
        assert!(g.head_entities("m.02", "film.film.directed_by").is_empty());
    }

    #[test]
    fn labels_fall_back_to_ids() {
        let g = g0();
        assert_eq!(g.label_of("m.02"), "judaism");
        assert_eq!(g.label_of("m.07"), "william wyler");
        assert_eq!(g.label_of("m.99"), "m.99");
    }

    #[test]
    fn bounded_reachability() {
        let g = g0();
        let seed = |s: &str| vec![EntityId::new(s).unwrap()];
        assert!(g.solvable_within_hops(&seed("m.01"), &["judaism".into()], 1));
        assert!(!g.solvable_within_hops(&seed("m.04"), &["william wyler".into()], 1));
        assert!(g.solvable_within_hops(&seed("m.04"), &["william wyler".into()], 2));
        assert!(!g.solvable_within_hops(&seed("m.01"), &["nonexistent".into()], 2));
    }

    #[test]
    fn load_parses_comments_and_rejects_bad_rows() {
        let triples = "# fixture\nm.01\tpeople.person.religion\tm.02\n\nm.02\treligion.religion.founders\tm.06\n";
        let aliases = "m.02\tjudaism\n# comment\nm.02\tJudaism\n";
        let g = KnowledgeGraph::load(triples.as_bytes(), Some(aliases.as_bytes())).unwrap();
        assert_eq!(g.triple_count(), 2);
        assert_eq!(g.label_of("m.02"), "Judaism");
        assert_eq!(g.alias_overwrites(), 1);

        let bad = "m.01\tonly_two_fields\n";
        let err = KnowledgeGraph::load(bad.as_bytes(), None::<&[u8]>).unwrap_err();
        match err {
            LoadError::Malformed { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn invariants_hold_on_fixture() {
        g0().check_invariants().unwrap();
    }
}
