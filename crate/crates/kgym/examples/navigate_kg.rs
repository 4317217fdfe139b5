//! Load a small graph and walk it with the four navigation verbs.
//!
//!     cargo run --example navigate_kg

use kgym::fixtures;
use kgym::kg::EntityId;

fn main() {
    let g = fixtures::g0();
    println!(
        "graph: {} triples, {} entities, {} relations\n",
        g.triple_count(),
        g.entity_count(),
        g.relation_vocabulary().len()
    );

    // outgoing relations of an entity
    println!("get_tail_relations(m.01):");
    for r in g.tail_relations("m.01") {
        println!("  {r}");
    }

    // follow one of them
    println!("\nget_tail_entities(m.01, people.person.religion):");
    for e in g.tail_entities("m.01", "people.person.religion") {
        println!("  {e}  ->  {}", g.label_of(e.as_str()));
    }

    // the reverse direction
    println!("\nget_head_entities(m.07, film.film.directed_by):");
    for e in g.head_entities("m.07", "film.film.directed_by") {
        println!("  {e}  ->  {}", g.label_of(e.as_str()));
    }

    // a miss is an empty list, never an error, and says nothing about why
    let miss = g.tail_entities("m.01", "film.actor.film");
    println!("\nget_tail_entities(m.01, film.actor.film) -> {miss:?} (silent failure)");
    let unknown = g.tail_relations("m.9999");
    println!("get_tail_relations(m.9999)              -> {unknown:?} (unknown entity, same surface)");

    // bounded BFS answerability check
    let seeds = vec![EntityId::new("m.04").unwrap()];
    let gold = vec!["william wyler".to_string()];
    println!(
        "\nreach 'william wyler' from m.04 within 1 hop: {}",
        g.solvable_within_hops(&seeds, &gold, 1)
    );
    println!(
        "reach 'william wyler' from m.04 within 2 hops: {}",
        g.solvable_within_hops(&seeds, &gold, 2)
    );
}
