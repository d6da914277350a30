//! The OpenAI-compatible backend against a local single-purpose HTTP server.
#![cfg(feature = "remote")]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use mtp_core::gateway::{
    ChatMessage, Gateway, GatewayError, ImageInput, OpenAiBackend, RetryPolicy,
};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Serves the scripted `(status, body)` replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line
                .split_whitespace()
                .nth(1)
                .unwrap_or("")
                .to_string();
            let mut length = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut raw = vec![0; length];
            reader.read_exact(&mut raw).unwrap();
            log.lock().unwrap().push(Seen {
                path,
                auth,
                body: serde_json::from_slice(&raw).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn chat_reply(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn gateway(url: &str) -> Gateway {
    let backend = OpenAiBackend::new(url, Some("sk-test".into()), Duration::from_secs(5)).unwrap();
    Gateway::new(Arc::new(backend), "gpt-test").with_retry(RetryPolicy::no_delay(3))
}

#[test]
fn chat_request_shape() {
    let (url, seen) = serve(vec![(200, chat_reply("utterances = [utterance_2]"))]);
    let out = gateway(&url)
        .chat(vec![ChatMessage::system("sys"), ChatMessage::user("hello")])
        .unwrap();
    assert_eq!(out, "utterances = [utterance_2]");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "gpt-test");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(
        body["messages"][0],
        json!({"role": "system", "content": "sys"})
    );
    assert_eq!(body["messages"][1]["content"], "hello");
}

#[test]
fn images_travel_as_data_urls() {
    let (url, seen) = serve(vec![(200, chat_reply("A woman laughing."))]);
    let image = ImageInput::new("image/png", vec![1, 2, 3]);
    gateway(&url)
        .chat(vec![ChatMessage::user("describe").with_image(image)])
        .unwrap();
    let parts = seen.lock().unwrap()[0].body["messages"][0]["content"].clone();
    assert_eq!(parts[0], json!({"type": "text", "text": "describe"}));
    assert_eq!(parts[1]["image_url"]["url"], "data:image/png;base64,AQID");
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = serve(vec![
        (500, "{}".into()),
        (429, "{}".into()),
        (200, chat_reply("ok")),
    ]);
    assert_eq!(
        gateway(&url).chat(vec![ChatMessage::user("x")]).unwrap(),
        "ok"
    );
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn auth_failures_are_not_retried() {
    let (url, seen) = serve(vec![
        (401, "{\"error\":\"bad key\"}".into()),
        (200, chat_reply("late")),
    ]);
    let err = gateway(&url)
        .chat(vec![ChatMessage::user("x")])
        .unwrap_err();
    assert!(matches!(err, GatewayError::Config(_)), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn embeddings_in_input_order() {
    let reply = json!({"data": [
        {"index": 1, "embedding": [0.0, 2.0]},
        {"index": 0, "embedding": [3.0, 0.0]}
    ]})
    .to_string();
    let (url, seen) = serve(vec![(200, reply)]);
    let vecs = gateway(&url).embed(&["a".into(), "b".into()]).unwrap();
    assert_eq!(vecs, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/embeddings");
    assert_eq!(seen[0].body["input"], json!(["a", "b"]));
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let err = gateway(&url)
        .chat(vec![ChatMessage::user("x")])
        .unwrap_err();
    assert!(
        matches!(err, GatewayError::Transport { attempts: 3, .. }),
        "{err:?}"
    );
}
