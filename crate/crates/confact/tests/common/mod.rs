//! Shared test helpers: a minimal OpenAI-compatible mock HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// One canned HTTP response.
#[derive(Clone)]
pub struct MockResponse {
    pub status: u16,
    pub body: String,
}

impl MockResponse {
    /// A well-formed chat completion with the given text.
    pub fn completion(text: &str) -> Self {
        let body = serde_json::json!({
            "id": "chatcmpl-mock",
            "object": "chat.completion",
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": text},
                "finish_reason": "stop"
            }],
            "usage": {"prompt_tokens": 7, "completion_tokens": 3, "total_tokens": 10}
        })
        .to_string();
        MockResponse { status: 200, body }
    }

    #[allow(dead_code)] // used by the http_backend tests only
    pub fn error(status: u16, message: &str) -> Self {
        MockResponse {
            status,
            body: serde_json::json!({"error": {"message": message}}).to_string(),
        }
    }
}

fn handle(mut stream: TcpStream, response: &MockResponse) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            break;
        }
        if let Some(value) = trimmed
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
            .and_then(|v| v.parse::<usize>().ok())
        {
            content_length = value;
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok();
    let reason = match response.status {
        200 => "OK",
        400 => "Bad Request",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        _ => "Status",
    };
    let payload = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        reason,
        response.body.len(),
        response.body
    );
    stream.write_all(payload.as_bytes()).ok();
    stream.flush().ok();
}

/// Serve `script` responses in order, repeating the last one forever.
/// Returns the base URL and a counter of handled requests.
pub fn spawn_mock_server(script: Vec<MockResponse>) -> (String, Arc<AtomicUsize>) {
    assert!(!script.is_empty());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let i = counter.fetch_add(1, Ordering::SeqCst);
            let response = script.get(i).unwrap_or_else(|| script.last().unwrap()).clone();
            handle(stream, &response);
        }
    });
    (format!("http://{addr}/v1"), hits)
}
