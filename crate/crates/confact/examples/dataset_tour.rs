//! Load the bundled dataset, print split statistics, validate it, and convert
//! a claim into a binary question with a scripted backend.
//!
//! Run: `cargo run -p confact --example dataset_tour`

use std::path::Path;

use confact::corpus::{
    convert_claim_to_question, load_dataset, split_stats, validate_dataset, Split,
};
use confact::llm::{ChatOptions, ScriptedBackend};

fn main() -> confact::Result<()> {
    let dataset = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/fixture_10.jsonl");
    let records = load_dataset(&dataset)?;
    println!("loaded {} claims from {}", records.len(), dataset.display());

    for split in [Split::ModC, Split::HumC] {
        let stats = split_stats(&records, split);
        println!(
            "{split}: {} claims ({} yes / {} no), {} distinct sources",
            stats.n_claims, stats.n_yes, stats.n_no, stats.n_sources
        );
    }

    let report = validate_dataset(&records);
    println!("validation: {report}");

    // Claim-to-question conversion normally talks to a live backend; the
    // scripted one stands in so the example runs offline.
    let claim = &records[1];
    let backend = ScriptedBackend::always(
        "Did Nigeria have a population of 45 million at the time of independence?",
    );
    let question = convert_claim_to_question(claim, &backend, &ChatOptions::test())?;
    println!("claim:    {}", claim.claim);
    println!("question: {question}");
    Ok(())
}
