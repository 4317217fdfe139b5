//! Tool dispatch: executes a verb against the graph and renders the
//! response text surface. Entities render as alias labels when one exists
//! (raw ids otherwise), relations as dotted names, one item per line, with
//! an optional truncation cap.

use crate::kg::KnowledgeGraph;
use crate::trajectory::{CallArgs, ToolVerb};

/// Default cap on rendered response items.
pub const DEFAULT_RESPONSE_CAP: usize = 100;

/// Rendered tool response: the lines inlined into the transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolResponse {
    pub lines: Vec<String>,
    pub truncated: bool,
}

impl ToolResponse {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

fn capped(items: Vec<String>, cap: usize) -> ToolResponse {
    if items.len() > cap {
        ToolResponse {
            lines: items.into_iter().take(cap).collect(),
            truncated: true,
        }
    } else {
        ToolResponse {
            lines: items,
            truncated: false,
        }
    }
}

/// Runs one verb against the graph. Unknown entities and absent relations
/// produce an empty response, never an error.
pub fn execute(
    g: &KnowledgeGraph,
    verb: ToolVerb,
    entity: &str,
    relation: Option<&str>,
    cap: usize,
) -> ToolResponse {
    let items: Vec<String> = match verb {
        ToolVerb::GetTailRelations => g
            .tail_relations(entity)
            .into_iter()
            .map(|r| r.as_str().to_string())
            .collect(),
        ToolVerb::GetHeadRelations => g
            .head_relations(entity)
            .into_iter()
            .map(|r| r.as_str().to_string())
            .collect(),
        ToolVerb::GetTailEntities => g
            .tail_entities(entity, relation.unwrap_or(""))
            .into_iter()
            .map(|e| g.label_of(e.as_str()).to_string())
            .collect(),
        ToolVerb::GetHeadEntities => g
            .head_entities(entity, relation.unwrap_or(""))
            .into_iter()
            .map(|e| g.label_of(e.as_str()).to_string())
            .collect(),
    };
    capped(items, cap)
}

/// Executes parsed call arguments with the default cap.
pub fn execute_args(g: &KnowledgeGraph, args: &CallArgs) -> ToolResponse {
    execute(g, args.verb, &args.entity, args.relation.as_deref(), DEFAULT_RESPONSE_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};

    #[test]
    fn renders_labels_for_entities_and_names_for_relations() {
        let g = fixtures::g0();
        let r = execute(&g, ToolVerb::GetTailEntities, "m.01", Some("people.person.religion"), 100);
        assert_eq!(r.lines, ["judaism"]);
        assert!(!r.truncated);
        let r = execute(&g, ToolVerb::GetTailRelations, "m.01", None, 100);
        assert_eq!(
            r.lines,
            ["people.person.place_of_birth", "people.person.religion"]
        );
    }

    #[test]
    fn silent_failure_is_an_empty_response() {
        let g = fixtures::g0();
        let r = execute(&g, ToolVerb::GetTailEntities, "m.01", Some("film.actor.film"), 100);
        assert!(r.is_empty());
        assert!(!r.truncated);
    }

    #[test]
    fn truncation_cap_applies() {
        let rel = RelationId::new("kb.many").unwrap();
        let head = EntityId::new("m.h").unwrap();
        let triples: Vec<Triple> = (0..150)
            .map(|i| {
                Triple::new(
                    head.clone(),
                    rel.clone(),
                    EntityId::new(format!("m.t{i:03}")).unwrap(),
                )
            })
            .collect();
        let g = KnowledgeGraph::from_triples(triples, []);
        let r = execute(&g, ToolVerb::GetTailEntities, "m.h", Some("kb.many"), 100);
        assert_eq!(r.lines.len(), 100);
        assert!(r.truncated);
        let r = execute(&g, ToolVerb::GetTailEntities, "m.h", Some("kb.many"), 200);
        assert_eq!(r.lines.len(), 150);
        assert!(!r.truncated);
    }
}
