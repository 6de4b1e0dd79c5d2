//! Score verdicts against gold answers and render a report.
//!
//! Run: `cargo run -p confact --example evaluate_verdicts`

use std::collections::BTreeMap;

use confact::corpus::{ClaimRecord, GoldAnswer, Origin, Split};
use confact::evaluation::{render_report, score, CardKey, ProviderKind};
use confact::generation::{ParsedAnswer, Strategy, Verdict};
use confact::ranking::RankingMode;

fn gold(n_yes: usize, n_no: usize) -> Vec<ClaimRecord> {
    (0..n_yes + n_no)
        .map(|i| ClaimRecord {
            claim_id: format!("c{i}"),
            claim: "claim".to_string(),
            question: "question?".to_string(),
            claim_date: None,
            gold_answer: if i < n_yes { GoldAnswer::Yes } else { GoldAnswer::No },
            origin: Origin::Other,
            split: Split::HumC,
            documents: Vec::new(),
        })
        .collect()
}

fn constant_verdicts(gold: &[ClaimRecord], answer: ParsedAnswer) -> Vec<Verdict> {
    gold.iter()
        .map(|record| Verdict {
            claim_id: record.claim_id.clone(),
            strategy: Strategy::DirA,
            answer,
            candidates: Vec::new(),
            raw_responses: Vec::new(),
            token_usage: None,
            note: None,
        })
        .collect()
}

fn main() -> confact::Result<()> {
    // A skewed two-class set: accuracy flatters the majority-class baseline,
    // macro-F1 exposes it.
    let gold = gold(51, 236);
    let all_no = score(&constant_verdicts(&gold, ParsedAnswer::No), &gold)?;
    println!(
        "all-No baseline: n={} accuracy={:.4} macro_f1={:.4}",
        all_no.n, all_no.accuracy, all_no.macro_f1
    );

    let mut mixed = constant_verdicts(&gold, ParsedAnswer::No);
    for verdict in mixed.iter_mut().take(40) {
        verdict.answer = ParsedAnswer::Yes;
    }
    for verdict in mixed.iter_mut().rev().take(10) {
        verdict.answer = ParsedAnswer::Unparseable;
    }
    let better = score(&mixed, &gold)?;
    println!(
        "mixed predictor: n={} accuracy={:.4} macro_f1={:.4} unparseable={}",
        better.n, better.accuracy, better.macro_f1, better.n_unparseable
    );
    println!(
        "confusion (gold x predicted): yes_yes={} yes_no={} no_yes={} no_no={}",
        better.confusion.yes_yes,
        better.confusion.yes_no,
        better.confusion.no_yes,
        better.confusion.no_no
    );

    let mut cards = BTreeMap::new();
    let key = |strategy| CardKey {
        split: Split::HumC,
        strategy,
        provider: ProviderKind::None,
        mode: RankingMode::RelevanceOnly,
    };
    cards.insert(key(Strategy::MajV), all_no);
    cards.insert(key(Strategy::DirA), better);
    println!("\n{}", render_report(&cards));
    Ok(())
}
