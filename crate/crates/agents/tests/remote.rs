use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use layoutpilot_agents::model::{ModelClient, ModelError, ModelRequest, RemoteConfig};
use layoutpilot_agents::remote::RemoteClient;
use layoutpilot_agents::AgentId;

struct Seen {
    auth: Option<String>,
    body: serde_json::Value,
}

/// Serves one canned `(status, body)` per connection, in order.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut r = BufReader::new(stream);
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                r.read_line(&mut line).unwrap();
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
            let mut buf = vec![0; len];
            r.read_exact(&mut buf).unwrap();
            tx.send(Seen {
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            })
            .unwrap();
            let mut s = r.into_inner();
            write!(
                s,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn request() -> ModelRequest {
    ModelRequest {
        agent: AgentId::Classifier,
        turn: 1,
        call: 1,
        request: "swap M1 and M2".into(),
        system: "You classify requests.".into(),
        user: "swap M1 and M2".into(),
    }
}

fn reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn client(url: String) -> RemoteClient {
    let mut cfg = RemoteConfig::new(url);
    cfg.key = Some("sk-test".into());
    cfg.model = "test-model".into();
    cfg.timeout = Duration::from_secs(5);
    RemoteClient::new(cfg)
}

#[test]
fn sends_chat_messages_and_reads_the_first_choice() {
    let (url, seen) = serve(vec![(200, reply("Concrete"))]);
    let out = client(url).complete(&request()).unwrap();
    assert_eq!(out, "Concrete");
    let s = seen.recv().unwrap();
    assert_eq!(s.auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(s.body["model"], "test-model");
    assert_eq!(s.body["temperature"], 0);
    assert_eq!(s.body["messages"][0]["role"], "system");
    assert_eq!(s.body["messages"][0]["content"], "You classify requests.");
    assert_eq!(s.body["messages"][1]["content"], "swap M1 and M2");
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = serve(vec![(503, "{}".into()), (200, reply("Abstract"))]);
    assert_eq!(client(url).complete(&request()).unwrap(), "Abstract");
    assert_eq!(seen.iter().take(2).count(), 2);
}

#[test]
fn client_errors_and_dead_endpoints_are_unavailable() {
    let (url, _seen) = serve(vec![(401, "{}".into())]);
    assert!(matches!(client(url).complete(&request()), Err(ModelError::Unavailable { .. })));
    let dead = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", dead.local_addr().unwrap());
    drop(dead);
    let mut cfg = RemoteConfig::new(url);
    cfg.retries = 0;
    assert!(RemoteClient::new(cfg).complete(&request()).is_err());
}
