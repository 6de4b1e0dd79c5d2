//! Live-backend behavior against a local mock chat-completions server.

mod common;

use std::sync::atomic::Ordering;

use common::{spawn_mock_server, MockResponse};
use confact::error::Error;
use confact::llm::{
    ChatBackend, ChatMessage, ChatRequest, FinishReason, HttpBackend, HttpConfig, Role,
};

fn request() -> ChatRequest {
    ChatRequest {
        model_name: "mock-model".to_string(),
        messages: vec![
            ChatMessage {
                role: Role::System,
                content: "be terse".to_string(),
            },
            ChatMessage {
                role: Role::User,
                content: "answer".to_string(),
            },
        ],
        temperature: 0.0,
        max_output_tokens: 32,
    }
}

fn backend(url: String) -> HttpBackend {
    HttpBackend::new(&HttpConfig {
        url,
        api_key: Some("test-key".to_string()),
        context_window: None,
        max_parallel: Some(2),
    })
    .unwrap()
}

#[test]
fn completes_and_parses_usage() {
    let (url, hits) = spawn_mock_server(vec![MockResponse::completion("Final Answer: yes")]);
    let response = backend(url).complete(&request()).unwrap();
    assert_eq!(response.text, "Final Answer: yes");
    assert_eq!(response.finish_reason, FinishReason::Stop);
    assert_eq!(response.usage.unwrap().total_tokens, 10);
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn retries_transient_failures() {
    let (url, hits) = spawn_mock_server(vec![
        MockResponse::error(500, "flaky"),
        MockResponse::error(429, "slow down"),
        MockResponse::completion("recovered"),
    ]);
    let response = backend(url).complete(&request()).unwrap();
    assert_eq!(response.text, "recovered");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn does_not_retry_client_errors() {
    let (url, hits) = spawn_mock_server(vec![
        MockResponse::error(400, "bad request"),
        MockResponse::completion("should never be reached"),
    ]);
    let err = backend(url).complete(&request()).unwrap_err();
    assert!(matches!(err, Error::Transport(_)));
    assert!(err.to_string().contains("400"));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn gives_up_after_three_attempts() {
    let (url, hits) = spawn_mock_server(vec![MockResponse::error(500, "always down")]);
    let err = backend(url).complete(&request()).unwrap_err();
    assert!(matches!(err, Error::Transport(_)));
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}
