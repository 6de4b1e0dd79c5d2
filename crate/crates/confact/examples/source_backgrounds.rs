//! Source background providers: curated lookup (GT) and the hybrid fallback
//! that generates, classifies and scores a background for unknown domains.
//!
//! Run: `cargo run -p confact --example source_backgrounds`

use std::path::Path;
use std::sync::Arc;

use confact::credibility::{
    lookup_curated, BackgroundProvider, CredibilityTable, FixtureSearchClient, HybridProvider,
};
use confact::llm::{ChatOptions, ScriptedBackend};

const GENERATED_BACKGROUND: &str = "History: unknownblog.example appeared in 2016 as an anonymous \
viral-news site.\nFunded by/Ownership: Ownership is not disclosed anywhere on the site.\n\
Analysis/Bias: Stories mix news and opinion without labels and lean heavily on emotional wording.\n\
Failed Fact Checks: Several stories were debunked by independent fact checkers.";

fn main() -> confact::Result<()> {
    let testdata = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata");
    let table = CredibilityTable::load(testdata.join("mbfc_fixture.tsv"))?;

    println!("curated lookups:");
    for domain in ["bbc.co.uk", "https://www.infowars.com/story", "unknownblog.example"] {
        let background = lookup_curated(domain, &table);
        println!(
            "  {:<28} -> {:?} level={:?} score={:?}",
            domain, background.provenance, background.level, background.score
        );
    }

    // The hybrid provider falls back to generation for uncurated domains.
    // A scripted backend plays the LLM: one rule for generation, one for
    // level classification.
    let backend = ScriptedBackend::new()
        .rule(["Target Media Credibility:"], "low")
        .rule(["background description of the media source"], GENERATED_BACKGROUND);
    let search = FixtureSearchClient::load(testdata.join("seeds_fixture.json"))?;
    let provider = HybridProvider::new(
        table,
        Arc::new(backend),
        Box::new(search),
        ChatOptions::test(),
    );

    println!("\nhybrid provider:");
    for domain in ["bbc.co.uk", "unknownblog.example", "no-seeds.example"] {
        let background = provider.background(domain);
        println!(
            "  {:<28} -> {:?} level={:?} score={:?}",
            domain, background.provenance, background.level, background.score
        );
        if !background.description.is_empty() {
            for line in background.description.lines().take(2) {
                println!("      {line}");
            }
        }
    }
    println!("\n(no-seeds.example degrades to missing: nothing to generate from)");
    Ok(())
}
