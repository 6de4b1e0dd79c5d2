//! Render and execute all eight answering strategies on one claim.
//!
//! Run: `cargo run -p confact --example prompt_strategies`

use std::collections::HashMap;
use std::path::Path;

use confact::chunking::chunk_paragraphs;
use confact::corpus::load_dataset;
use confact::credibility::{lookup_curated, CredibilityTable, SourceBackground};
use confact::generation::{run_strategy, GenerationOptions, Strategy};
use confact::llm::ScriptedBackend;
use confact::prompts::build_prompts;
use confact::ranking::{fuse_and_rank, RankingConfig};

fn main() -> confact::Result<()> {
    let testdata = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata");
    let records = load_dataset(testdata.join("fixture_2.jsonl"))?;
    let table = CredibilityTable::load(testdata.join("mbfc_fixture.tsv"))?;
    let claim = &records[0];

    let mut passages = Vec::new();
    let mut backgrounds: HashMap<String, SourceBackground> = HashMap::new();
    for doc in &claim.documents {
        passages.extend(chunk_paragraphs(doc, 256));
        backgrounds.insert(doc.source_domain.clone(), lookup_curated(&doc.source_domain, &table));
    }
    let ranked = fuse_and_rank(&claim.question, &passages, &backgrounds, &RankingConfig::default())?;

    // Show one rendered prompt in full.
    let prompts = build_prompts(Strategy::SbaCoT, &claim.question, &ranked, &backgrounds)?;
    println!("=== sba-cot prompt ===");
    println!("[system]\n{}\n", prompts[0].system);
    println!("[user]\n{}\n", prompts[0].user);

    // A scripted backend answers every strategy so the example runs offline.
    // Per-passage prompts quote one evidence text each; joint prompts see both.
    let backend = ScriptedBackend::new()
        .rule(["Evidence 2:"], "Final Answer: no")
        .rule(["Supporting Evidence:"], "Final Answer: no")
        .rule(["denied reports"], "The denial is direct and well sourced. Final Answer: no")
        .rule(["has quit international football"], "This report is second-hand. Final Answer: yes")
        .default_reply("Final Answer: no");

    println!("=== verdicts ===");
    for strategy in Strategy::ALL {
        let verdict = run_strategy(
            claim,
            strategy,
            &ranked,
            &backgrounds,
            &backend,
            &GenerationOptions::test(),
        )?;
        println!(
            "{:<8} -> {:?} ({} call(s), {} candidate(s))",
            strategy.to_string(),
            verdict.answer,
            verdict.raw_responses.len(),
            verdict.candidates.len()
        );
    }
    Ok(())
}
