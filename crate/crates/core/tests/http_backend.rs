use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use director_core::harness::oracle::oracle;
use director_core::harness::replay::replay_log;
use director_core::harness::report::{write_trial_log, LogHeader};
use director_core::harness::{goal_spec, run_trial, Termination, TrialConfig};
use director_core::llm::{Backend, BackendError, HttpBackend, HttpConfig, PromptTemplate, Query, Reason, Visibility};
use director_core::simworld::{BallObservation, SimConfig};
use serde_json::{json, Value};

struct Request {
    auth: Option<String>,
    body: Value,
}

fn read_request(stream: &mut TcpStream) -> Request {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    let mut auth = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if lower.starts_with("authorization:") {
            auth = Some(line["authorization:".len()..].trim().to_string());
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    Request { auth, body: serde_json::from_slice(&body).unwrap() }
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let msg = format!("HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}", body.len());
    stream.write_all(msg.as_bytes()).unwrap();
}

fn completion(text: &str) -> String {
    json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": text } }] }).to_string()
}

/// Serves one canned reply per connection and reports each request.
fn stub(replies: Vec<(&'static str, String)>) -> (String, mpsc::Receiver<Request>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (mut s, _) = listener.accept().unwrap();
            let req = read_request(&mut s);
            respond(&mut s, status, &body);
            let _ = tx.send(req);
        }
    });
    (url, rx)
}

fn backend(url: String, deadline: f64, key: Option<&str>) -> HttpBackend {
    let cfg = HttpConfig { endpoint: url, deadline_secs: deadline, ..HttpConfig::default() };
    HttpBackend::with_api_key(cfg, key.map(str::to_string)).unwrap()
}

fn query(prompt: &str) -> Query {
    Query { prompt: prompt.into(), request: "Find the ball".into(), observation: BallObservation::NEVER_SEEN, poll_index: 0, seed: 0 }
}

#[test]
fn ok_reply_returns_message_content() {
    let (url, rx) = stub(vec![("200 OK", completion("Task: LookAround Priority: 1"))]);
    let b = backend(url, 5.0, Some("sk-test"));
    assert_eq!(b.complete(&query("hello")).unwrap(), "Task: LookAround Priority: 1");
    let req = rx.recv().unwrap();
    assert_eq!(req.auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(req.body["temperature"], 0.0);
    assert_eq!(req.body["messages"][0]["content"], "hello");
}

#[test]
fn rate_limit_and_garbage_are_errors() {
    let (url, _rx) = stub(vec![("429 Too Many Requests", "{}".into()), ("200 OK", "not json".into()), ("200 OK", json!({"choices": []}).to_string())]);
    let b = backend(url, 5.0, None);
    assert_eq!(b.complete(&query("a")), Err(BackendError::Status(429)));
    assert!(matches!(b.complete(&query("b")), Err(BackendError::Malformed(_))));
    assert!(matches!(b.complete(&query("c")), Err(BackendError::Malformed(_))));
}

#[test]
fn slow_endpoint_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let _ = read_request(&mut s);
        thread::sleep(Duration::from_secs(3));
    });
    let b = backend(url, 0.3, None);
    assert_eq!(b.complete(&query("a")), Err(BackendError::Timeout));
}

#[test]
fn refused_connection_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = backend(format!("http://127.0.0.1:{port}/v1/chat/completions"), 1.0, None);
    assert!(matches!(b.complete(&query("a")), Err(BackendError::Transport(_))));
}

/// Chat endpoint that answers like the oracle, reading visibility and the
/// request back out of the prompt.
fn oracle_server(limit: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    thread::spawn(move || {
        let policy = oracle();
        for _ in 0..limit {
            let Ok((mut s, _)) = listener.accept() else { return };
            let req = read_request(&mut s);
            let prompt = req.body["messages"][0]["content"].as_str().unwrap().to_string();
            let request = prompt["Given desired user request: ".len()..].split(" and current information").next().unwrap();
            let vis = if prompt.contains("Ball is visible") { Visibility::Visible } else { Visibility::NotVisible };
            let text = policy.lookup(request, vis).unwrap().to_string();
            respond(&mut s, "200 OK", &completion(&text));
        }
    });
    url
}

#[test]
fn trial_over_http_then_replay_from_log() {
    let b = backend(oracle_server(64), 5.0, None);
    let spec = goal_spec(2).unwrap();
    let sim = SimConfig::default();
    let cfg = TrialConfig::default();
    let r = run_trial(&spec, &b, 1, sim.clone().into(), &cfg, PromptTemplate::default()).unwrap();
    assert_eq!(r.termination, Termination::Success);
    assert_eq!(r.executability(), 1.0);
    assert_eq!(r.backend, "http");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("goal2.jsonl");
    let header = LogHeader { goal: spec, seed: 1, backend: "http".into(), sim, trial: cfg, template: PromptTemplate::default().text().into() };
    write_trial_log(&path, &header, &r.log).unwrap();
    let replayed = replay_log(&path).unwrap();
    assert!(replayed.matches(), "diverged at {:?}", replayed.diverged_at);
    assert_eq!(replayed.result.polls, r.polls);
    assert_eq!(replayed.result.termination, Termination::Success);
}

#[test]
fn failing_endpoint_yields_timeout_decisions() {
    let (url, _rx) = stub(vec![("429 Too Many Requests", "{}".into()); 3]);
    let b = backend(url, 2.0, None);
    let r = run_trial(&goal_spec(1).unwrap(), &b, 1, SimConfig::default().into(), &TrialConfig::default(), PromptTemplate::default()).unwrap();
    assert_eq!(r.termination, Termination::NoProgress);
    assert_eq!((r.polls, r.executable_polls), (3, 0));
    let reasons: Vec<Reason> = r
        .log
        .iter()
        .filter_map(|rec| match &rec.event {
            director_core::harness::Event::Poll { decision } => Some(decision.reason.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(reasons, vec![Reason::Timeout; 3]);
}
