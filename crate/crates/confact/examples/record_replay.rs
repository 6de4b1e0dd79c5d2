//! Canonical request digests and the record/replay backend pair.
//!
//! Run: `cargo run -p confact --example record_replay`

use confact::error::Error;
use confact::llm::{
    canonical_digest, ChatBackend, ChatMessage, ChatRequest, RecordBackend, ReplayBackend, Role,
    ScriptedBackend,
};

fn request(content: &str, temperature: f64) -> ChatRequest {
    ChatRequest {
        model_name: "demo-model".to_string(),
        messages: vec![ChatMessage {
            role: Role::User,
            content: content.to_string(),
        }],
        temperature,
        max_output_tokens: 64,
    }
}

fn main() -> confact::Result<()> {
    let greedy = request("Is the sky blue? Answer yes or no.", 0.0);
    let sampled = request("Is the sky blue? Answer yes or no.", 0.7);
    println!("digest(greedy):  {}", canonical_digest(&greedy));
    println!("digest(sampled): {}", canonical_digest(&sampled));
    println!("digests differ because temperature is part of the request\n");

    let dir = tempfile::tempdir().expect("tempdir");
    let store = dir.path().join("store.jsonl");

    // Record: the inner backend is scripted here; in production it is the
    // live HTTP client.
    let recorder = RecordBackend::create(&store, Box::new(ScriptedBackend::always("yes")))?;
    let first = recorder.complete(&greedy)?;
    let second = recorder.complete(&greedy)?; // served from the store
    println!("recorded reply: {:?} (repeat calls hit the store: {:?})", first.text, second.text);
    drop(recorder);

    // Replay: fully offline, byte-identical answers.
    let replay = ReplayBackend::open(&store)?;
    println!("replayed reply: {:?}", replay.complete(&greedy)?.text);
    match replay.complete(&sampled) {
        Err(Error::ReplayMiss { digest }) => {
            println!("unrecorded request correctly missed (digest {digest})")
        }
        other => println!("unexpected outcome: {other:?}"),
    }
    println!(
        "store holds {} entr{} at {}",
        replay.len(),
        if replay.len() == 1 { "y" } else { "ies" },
        store.display()
    );
    Ok(())
}
