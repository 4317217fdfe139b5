//! Network tool API: the four verbs behind a wire protocol.
//!
//! The native transport is length-delimited JSON over a persistent TCP
//! stream — each message is a 4-byte big-endian length prefix followed by
//! one JSON object; one request yields one reply, in order, so clients may
//! pipeline and correlate via `request_id`. An HTTP binding maps the same
//! JSON bodies onto a single POST endpoint for frameworks that prefer it.
//!
//! The server is stateless per request and only ever reads the immutable
//! graph; silent failure is preserved on the wire (an empty `results` list
//! with `ok = true`). The five-turn cap is a policy-side budget and is not
//! enforced here.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::kg::KnowledgeGraph;
use crate::respond;
use crate::trajectory::ToolVerb;

/// Upper bound on a single frame; anything larger is treated as a framing
/// error and drops the connection.
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

/// One tool invocation. `relation` is required exactly for the
/// entity-fetch verbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRequest {
    pub verb: String,
    pub entity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

/// Reply to one request. `ok = true` with empty `results` is the silent
/// failure surface; `ok = false` carries a machine-readable error code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolReply {
    pub ok: bool,
    pub results: Vec<String>,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

impl ToolReply {
    fn failure(code: &str, request_id: Option<String>) -> Self {
        ToolReply {
            ok: false,
            results: Vec::new(),
            truncated: false,
            error: Some(code.to_string()),
            request_id,
        }
    }
}

/// Dispatches one request against the graph.
pub fn handle_request(g: &KnowledgeGraph, req: &ToolRequest, cap: usize) -> ToolReply {
    let Some(verb) = ToolVerb::from_name(&req.verb) else {
        return ToolReply::failure("unknown_verb", req.request_id.clone());
    };
    if verb.takes_relation() != req.relation.is_some() {
        return ToolReply::failure("bad_arity", req.request_id.clone());
    }
    let response = respond::execute(g, verb, &req.entity, req.relation.as_deref(), cap);
    ToolReply {
        ok: true,
        results: response.lines,
        truncated: response.truncated,
        error: None,
        request_id: req.request_id.clone(),
    }
}

/// Writes one length-prefixed JSON frame.
pub fn write_frame<W: Write, T: Serialize>(w: &mut W, message: &T) -> io::Result<()> {
    let body = serde_json::to_vec(message).map_err(io::Error::other)?;
    let len = u32::try_from(body.len()).map_err(|_| io::Error::other("frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Reads one length-prefixed frame; `Ok(None)` on clean end-of-stream.
/// The deserialized value is `None` in the pair when the body is not valid
/// JSON for `T` (the raw frame was still consumed).
pub fn read_frame<R: Read, T: DeserializeOwned>(r: &mut R) -> io::Result<Option<Option<T>>> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len_buf) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::other("frame exceeds size bound"));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(serde_json::from_slice(&body).ok()))
}

/// Running server; dropping the handle leaves the server running, calling
/// [`ServerHandle::shutdown`] stops the accept loop and joins it.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

fn serve_connection(g: &KnowledgeGraph, stream: TcpStream, cap: usize) {
    let mut reader = io::BufReader::new(stream.try_clone().expect("clone stream"));
    let mut writer = io::BufWriter::new(stream);
    loop {
        match read_frame::<_, ToolRequest>(&mut reader) {
            Ok(Some(Some(req))) => {
                let reply = handle_request(g, &req, cap);
                if write_frame(&mut writer, &reply).is_err() {
                    return;
                }
            }
            Ok(Some(None)) => {
                let reply = ToolReply::failure("bad_request", None);
                if write_frame(&mut writer, &reply).is_err() {
                    return;
                }
            }
            Ok(None) | Err(_) => return,
        }
    }
}

/// Starts the framed-JSON TCP server. Bind to port 0 for an ephemeral
/// port; the bound address is on the returned handle.
pub fn serve_framed<A: ToSocketAddrs>(
    g: Arc<KnowledgeGraph>,
    addr: A,
    cap: usize,
) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = stop.clone();
    let join = thread::spawn(move || loop {
        if stop_flag.load(Ordering::SeqCst) {
            return;
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nonblocking(false);
                let g = g.clone();
                thread::spawn(move || serve_connection(&g, stream, cap));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(5));
            }
            Err(_) => return,
        }
    });
    Ok(ServerHandle {
        addr,
        stop,
        join: Some(join),
    })
}

/// Starts the HTTP binding: the same JSON bodies on a single POST
/// endpoint. Non-POST methods get 405, unparseable bodies a
/// `bad_request` reply with status 400.
pub fn serve_http<A: ToSocketAddrs>(
    g: Arc<KnowledgeGraph>,
    addr: A,
    cap: usize,
) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let server = tiny_http::Server::from_listener(listener, None)
        .map_err(|e| io::Error::other(e.to_string()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = stop.clone();
    let join = thread::spawn(move || loop {
        if stop_flag.load(Ordering::SeqCst) {
            return;
        }
        match server.recv_timeout(Duration::from_millis(25)) {
            Ok(Some(mut request)) => {
                let json_header = tiny_http::Header::from_bytes(
                    &b"Content-Type"[..],
                    &b"application/json"[..],
                )
                .expect("static header");
                if request.method() != &tiny_http::Method::Post {
                    let _ = request.respond(
                        tiny_http::Response::from_string("POST only").with_status_code(405),
                    );
                    continue;
                }
                let mut body = String::new();
                let _ = request.as_reader().read_to_string(&mut body);
                let (status, reply) = match serde_json::from_str::<ToolRequest>(&body) {
                    Ok(req) => (200, handle_request(&g, &req, cap)),
                    Err(_) => (400, ToolReply::failure("bad_request", None)),
                };
                let body = serde_json::to_string(&reply).expect("reply serializes");
                let _ = request.respond(
                    tiny_http::Response::from_string(body)
                        .with_status_code(status)
                        .with_header(json_header),
                );
            }
            Ok(None) => {}
            Err(_) => return,
        }
    });
    Ok(ServerHandle {
        addr,
        stop,
        join: Some(join),
    })
}

/// Blocking client for the framed transport.
pub struct WireClient {
    reader: io::BufReader<TcpStream>,
    writer: io::BufWriter<TcpStream>,
}

impl WireClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        let reader = io::BufReader::new(stream.try_clone()?);
        Ok(Self {
            reader,
            writer: io::BufWriter::new(stream),
        })
    }

    /// One request, one reply.
    pub fn request(&mut self, req: &ToolRequest) -> io::Result<ToolReply> {
        self.send(req)?;
        self.receive()
    }

    /// Pipelining half: send without waiting.
    pub fn send(&mut self, req: &ToolRequest) -> io::Result<()> {
        write_frame(&mut self.writer, req)
    }

    /// Pipelining half: read the next reply in order.
    pub fn receive(&mut self) -> io::Result<ToolReply> {
        match read_frame::<_, ToolReply>(&mut self.reader)? {
            Some(Some(reply)) => Ok(reply),
            Some(None) => Err(io::Error::other("malformed reply frame")),
            None => Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "server closed the connection",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::respond::DEFAULT_RESPONSE_CAP;

    fn req(verb: &str, entity: &str, relation: Option<&str>) -> ToolRequest {
        ToolRequest {
            verb: verb.into(),
            entity: entity.into(),
            relation: relation.map(str::to_string),
            request_id: Some("r1".into()),
        }
    }

    #[test]
    fn handle_request_examples() {
        let g = fixtures::g0();
        let reply = handle_request(
            &g,
            &req("get_tail_entities", "m.01", Some("people.person.religion")),
            100,
        );
        assert!(reply.ok);
        assert_eq!(reply.results, ["judaism"]);
        assert!(!reply.truncated);
        assert_eq!(reply.request_id.as_deref(), Some("r1"));

        let reply = handle_request(&g, &req("get_tail_entities", "m.01", None), 100);
        assert!(!reply.ok);
        assert_eq!(reply.error.as_deref(), Some("bad_arity"));

        let reply = handle_request(
            &g,
            &req("get_tail_relations", "m.01", Some("people.person.religion")),
            100,
        );
        assert_eq!(reply.error.as_deref(), Some("bad_arity"));

        let reply = handle_request(&g, &req("get_tail_relations", "m.99", None), 100);
        assert!(reply.ok);
        assert!(reply.results.is_empty());

        let reply = handle_request(&g, &req("lookup", "m.01", None), 100);
        assert_eq!(reply.error.as_deref(), Some("unknown_verb"));
    }

    #[test]
    fn framed_round_trip() {
        let g = Arc::new(fixtures::g0());
        let server = serve_framed(g.clone(), "127.0.0.1:0", DEFAULT_RESPONSE_CAP).unwrap();
        let mut client = WireClient::connect(server.addr()).unwrap();

        let reply = client
            .request(&req("get_tail_relations", "m.01", None))
            .unwrap();
        assert!(reply.ok);
        assert_eq!(
            reply.results,
            ["people.person.place_of_birth", "people.person.religion"]
        );

        // pipelined pair comes back in order
        client.send(&req("get_tail_entities", "m.05", Some("film.film.directed_by"))).unwrap();
        client.send(&req("get_tail_relations", "m.99", None)).unwrap();
        let first = client.receive().unwrap();
        let second = client.receive().unwrap();
        assert_eq!(first.results, ["william wyler"]);
        assert!(second.results.is_empty());

        server.shutdown();
    }

    #[test]
    fn framed_bad_body_yields_bad_request() {
        let g = Arc::new(fixtures::g0());
        let server = serve_framed(g, "127.0.0.1:0", DEFAULT_RESPONSE_CAP).unwrap();
        let stream = TcpStream::connect(server.addr()).unwrap();
        let mut writer = io::BufWriter::new(stream.try_clone().unwrap());
        let body = b"not json";
        writer.write_all(&(body.len() as u32).to_be_bytes()).unwrap();
        writer.write_all(body).unwrap();
        writer.flush().unwrap();
        let mut reader = io::BufReader::new(stream);
        let reply: ToolReply = read_frame(&mut reader).unwrap().unwrap().unwrap();
        assert!(!reply.ok);
        assert_eq!(reply.error.as_deref(), Some("bad_request"));
        server.shutdown();
    }

    #[test]
    fn http_binding_round_trip() {
        let g = Arc::new(fixtures::g0());
        let server = serve_http(g, "127.0.0.1:0", DEFAULT_RESPONSE_CAP).unwrap();
        let addr = server.addr();

        let post = |body: &str| -> (u16, String) {
            let mut stream = TcpStream::connect(addr).unwrap();
            write!(
                stream,
                "POST /tool HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
            let mut raw = String::new();
            stream.read_to_string(&mut raw).unwrap();
            let status: u16 = raw
                .split_whitespace()
                .nth(1)
                .and_then(|s| s.parse().ok())
                .unwrap();
            let payload = raw.split("\r\n\r\n").nth(1).unwrap_or("").to_string();
            (status, payload)
        };

        let (status, payload) = post(
            r#"{"verb":"get_tail_entities","entity":"m.01","relation":"people.person.religion"}"#,
        );
        assert_eq!(status, 200);
        let reply: ToolReply = serde_json::from_str(&payload).unwrap();
        assert_eq!(reply.results, ["judaism"]);

        let (status, payload) = post("{nope");
        assert_eq!(status, 400);
        let reply: ToolReply = serde_json::from_str(&payload).unwrap();
        assert_eq!(reply.error.as_deref(), Some("bad_request"));

        server.shutdown();
    }
}
