//! Stage-1 stance annotation (three prompt variants + majority vote) and
//! conflict mining over the annotated claims.
//!
//! Run: `cargo run -p confact --example annotate_conflicts`

use std::path::Path;

use confact::annotation::{annotate_dataset, detect_conflicts, majority_stance};
use confact::corpus::{load_dataset, Stance};
use confact::llm::{ChatOptions, ScriptedBackend};

fn main() -> confact::Result<()> {
    let dataset = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/fixture_2.jsonl");
    let mut records = load_dataset(&dataset)?;
    for record in &mut records {
        for doc in &mut record.documents {
            doc.model_stance = None;
        }
    }

    // The scripted backend plays the annotator: the BBC denial piece rejects
    // the claim, the second-hand report supports it. The URL-only variant for
    // the second document disagrees, so its vote is 2:1.
    let backend = ScriptedBackend::new()
        .rule(["URL: https://en.mehrnews.com"], "Not enough evidence")
        .rule(["denied reports"], "Reject")
        .rule(["bbc.co.uk"], "Reject")
        .rule(["has quit international football"], "Support")
        .rule(["reuters.com"], "Support")
        .rule(["45 million"], "Support")
        .rule(["infowars.com"], "Reject")
        .rule(["fabrication"], "Reject");

    let annotations = annotate_dataset(&mut records, &backend, &ChatOptions::test())?;
    for annotation in &annotations {
        println!(
            "{}: votes {:?} -> {:?}",
            annotation.doc_id,
            annotation.labels.values().collect::<Vec<_>>(),
            annotation.final_stance
        );
    }

    println!("\nconflict detection:");
    for record in &records {
        println!(
            "  {}: conflicting = {}",
            record.claim_id,
            detect_conflicts(record)?
        );
    }

    // The vote rule itself: strict majority or NotEnoughEvidence.
    println!("\nmajority examples:");
    for labels in [
        vec![Stance::Support, Stance::Support, Stance::Reject],
        vec![Stance::Support, Stance::Reject, Stance::NotEnoughEvidence],
        vec![Stance::Reject],
    ] {
        println!("  {:?} -> {:?}", labels, majority_stance(&labels)?);
    }
    Ok(())
}
