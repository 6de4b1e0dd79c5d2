//! Rank the same passage set under all four modes: relevance only, source
//! filtering, and soft/hard credibility weighting.
//!
//! Run: `cargo run -p confact --example rank_fusion`

use std::collections::HashMap;
use std::path::Path;

use confact::chunking::chunk_paragraphs;
use confact::corpus::load_dataset;
use confact::credibility::{lookup_curated, CredibilityTable, SourceBackground};
use confact::ranking::{fuse_and_rank, RankingConfig, RankingMode};

fn main() -> confact::Result<()> {
    let testdata = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata");
    let records = load_dataset(testdata.join("fixture_10.jsonl"))?;
    let table = CredibilityTable::load(testdata.join("mbfc_fixture.tsv"))?;

    // The Pogba claim: a high-credibility rejection vs a low-credibility
    // confirmation, the situation credibility fusion exists for.
    let claim = &records[0];
    let mut passages = Vec::new();
    let mut backgrounds: HashMap<String, SourceBackground> = HashMap::new();
    for doc in &claim.documents {
        passages.extend(chunk_paragraphs(doc, 256));
        backgrounds.insert(doc.source_domain.clone(), lookup_curated(&doc.source_domain, &table));
    }
    println!("question: {}\n", claim.question);

    for mode in [
        RankingMode::RelevanceOnly,
        RankingMode::Sf,
        RankingMode::CwSoft,
        RankingMode::CwHard,
    ] {
        let config = RankingConfig { mode, ..RankingConfig::default() };
        let ranked = fuse_and_rank(&claim.question, &passages, &backgrounds, &config)?;
        println!("mode {mode}:");
        if ranked.is_empty() {
            println!("  (no admissible evidence)");
        }
        for entry in ranked {
            println!(
                "  #{} {:<14} rel={:+.3} norm={:.3} cred={} fused={:.3}",
                entry.rank,
                entry.passage.source_domain,
                entry.s_rel,
                entry.s_rel_norm,
                entry
                    .s_cred
                    .map(|s| format!("{s:.2}"))
                    .unwrap_or_else(|| "  - ".to_string()),
                entry.s_fused,
            );
        }
        println!();
    }
    Ok(())
}
