//! Serve the four verbs over both transports and query them.
//!
//! The framed protocol is a 4-byte big-endian length prefix followed by one
//! JSON object per message; the HTTP binding posts the same bodies to a
//! single endpoint.
//!
//!     cargo run --example tool_server

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use kgym::fixtures;
use kgym::respond::DEFAULT_RESPONSE_CAP;
use kgym::wire::{serve_framed, serve_http, ToolRequest, WireClient};

fn main() -> std::io::Result<()> {
    let g = Arc::new(fixtures::g0());

    // framed transport
    let framed = serve_framed(g.clone(), "127.0.0.1:0", DEFAULT_RESPONSE_CAP)?;
    println!("framed server on {}", framed.addr());
    let mut client = WireClient::connect(framed.addr())?;
    let requests = [
        ToolRequest {
            verb: "get_tail_relations".into(),
            entity: "m.01".into(),
            relation: None,
            request_id: Some("a".into()),
        },
        ToolRequest {
            verb: "get_tail_entities".into(),
            entity: "m.01".into(),
            relation: Some("people.person.religion".into()),
            request_id: Some("b".into()),
        },
        // silent failure crosses the wire as ok + empty results
        ToolRequest {
            verb: "get_tail_relations".into(),
            entity: "m.9999".into(),
            relation: None,
            request_id: Some("c".into()),
        },
        // arity errors are explicit
        ToolRequest {
            verb: "get_tail_entities".into(),
            entity: "m.01".into(),
            relation: None,
            request_id: Some("d".into()),
        },
    ];
    for req in &requests {
        let reply = client.request(req)?;
        println!(
            "  {:>2}: ok={} results={:?} error={:?}",
            req.request_id.as_deref().unwrap_or("-"),
            reply.ok,
            reply.results,
            reply.error
        );
    }
    framed.shutdown();

    // http binding: same body, one POST endpoint
    let http = serve_http(g, "127.0.0.1:0", DEFAULT_RESPONSE_CAP)?;
    println!("\nhttp server on {}", http.addr());
    let body = r#"{"verb":"get_head_entities","entity":"m.07","relation":"film.film.directed_by"}"#;
    let mut stream = TcpStream::connect(http.addr())?;
    write!(
        stream,
        "POST /tool HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        body.len(),
        body
    )?;
    let mut response = String::new();
    stream.read_to_string(&mut response)?;
    println!("  POST /tool -> {}", response.lines().next().unwrap_or(""));
    println!("  body: {}", response.split("\r\n\r\n").nth(1).unwrap_or(""));
    http.shutdown();
    Ok(())
}
