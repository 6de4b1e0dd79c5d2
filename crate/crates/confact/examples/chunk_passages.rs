//! Chunk one evidence document at paragraph and sentence granularity.
//!
//! Run: `cargo run -p confact --example chunk_passages`

use std::path::Path;

use confact::chunking::{chunk_paragraphs, chunk_sentences};
use confact::corpus::load_dataset;

fn main() -> confact::Result<()> {
    let dataset = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/fixture_10.jsonl");
    let records = load_dataset(&dataset)?;
    let doc = &records[0].documents[0];
    println!("document {} ({} bytes)\n", doc.doc_id, doc.content.len());

    println!("paragraph passages (cap 256 words):");
    for passage in chunk_paragraphs(doc, 256) {
        println!(
            "  {} [{}..{}] {} words: {}…",
            passage.passage_id,
            passage.char_span.0,
            passage.char_span.1,
            passage.word_count,
            passage.text.chars().take(60).collect::<String>()
        );
    }

    // A small cap forces the greedy packer to split.
    println!("\nparagraph passages (cap 40 words):");
    for passage in chunk_paragraphs(doc, 40) {
        println!("  {} {} words", passage.passage_id, passage.word_count);
    }

    println!("\nsentence passages:");
    for passage in chunk_sentences(doc) {
        println!("  {}: {}", passage.passage_id, passage.text);
    }
    Ok(())
}
