//! Parse raw agent transcripts into structured trajectories.
//!
//! Parsing is total: malformed input produces format flags, not errors.
//!
//!     cargo run --example parse_transcripts

use kgym::text::normalize;
use kgym::trajectory::parse_transcript;

fn show(label: &str, text: &str) {
    let t = parse_transcript(text);
    println!("== {label}");
    println!("   turns: {}, calls: {}", t.turns.len(), t.call_count());
    for (i, turn) in t.turns.iter().enumerate() {
        if let Some(call) = &turn.call {
            let status = if call.parse_ok() { "ok" } else { "UNPARSED" };
            println!("   call {i}: {} [{status}]", call.raw_text.trim());
        }
        if let Some(lines) = &turn.response_lines {
            println!("   response: {} line(s)", lines.len());
        }
    }
    println!("   answer: {:?}", t.final_answer_raw);
    println!("   flags:  {:?}\n", t.flags);
}

fn main() {
    show(
        "well-formed two-call trajectory",
        "<think>first list the relations</think>\
         <search>get_tail_relations(m.01)</search>\
         <tool_response>people.person.place_of_birth\npeople.person.religion</tool_response>\
         <search>get_tail_entities(m.01, people.person.religion)</search>\
         <tool_response>judaism</tool_response>\
         <answer>Judaism</answer>",
    );

    show(
        "drifted: the search tag sits inside think",
        "<think>let me query <search>get_tail_relations(m.01)</search> now</think>\
         <answer>islam</answer>",
    );

    show(
        "degenerate loop with a malformed call",
        "<search>lookup(m.01</search><search>lookup(m.01</search><search>lookup(m.01</search>",
    );

    // answer normalization: the form every match predicate sees
    for raw in ["The Judaism.", "  William  Wyler ", "Ben-Hur!"] {
        println!("normalize({raw:?}) = {:?}", normalize(raw));
    }
}
