//! Property tests over the pure kernels.

use std::collections::HashMap;

use proptest::prelude::*;

use confact::chunking::{chunk_paragraphs, chunk_sentences, Granularity};
use confact::corpus::{extract_source_domain, ClaimRecord, EvidenceDocument, GoldAnswer, Origin, Split};
use confact::credibility::{CredibilityLevel, Provenance, SourceBackground};
use confact::evaluation::score;
use confact::generation::{majority_vote, Answer, CandidateAnswer, ParsedAnswer, Strategy, TiePolicy, Verdict};
use confact::llm::{canonical_digest, ChatMessage, ChatRequest, Role};
use confact::ranking::{fuse_and_rank, RankingConfig, RankingMode};

fn document(content: String) -> EvidenceDocument {
    EvidenceDocument {
        doc_id: "d".to_string(),
        url: "https://example.com/x".to_string(),
        archived_url: None,
        source_domain: "example.com".to_string(),
        content,
        model_stance: None,
        human_stance: None,
        human_credibility: None,
        source_type: None,
    }
}

proptest! {
    #[test]
    fn paragraph_passages_respect_word_cap(content in ".{0,600}", max_words in 1usize..40) {
        let doc = document(content);
        for passage in chunk_paragraphs(&doc, max_words) {
            prop_assert!(passage.word_count <= max_words);
            prop_assert_eq!(passage.granularity, Granularity::Paragraph);
        }
    }

    #[test]
    fn chunking_covers_every_non_whitespace_byte(content in "[a-zA-Z0-9 .!?\n\u{e4}\u{410}-\u{44f}]{0,500}", max_words in 1usize..40) {
        let doc = document(content.clone());
        for passages in [chunk_paragraphs(&doc, max_words), chunk_sentences(&doc)] {
            let mut covered = vec![false; content.len()];
            let mut last_end = 0usize;
            for passage in &passages {
                prop_assert!(passage.char_span.0 >= last_end);
                last_end = passage.char_span.1;
                prop_assert_eq!(&passage.text, &content[passage.char_span.0..passage.char_span.1]);
                for flag in &mut covered[passage.char_span.0..passage.char_span.1] {
                    *flag = true;
                }
            }
            for (idx, ch) in content.char_indices() {
                if !ch.is_whitespace() {
                    prop_assert!(covered[idx], "byte {} ({:?}) uncovered", idx, ch);
                }
            }
        }
    }

    #[test]
    fn chunking_is_deterministic(content in ".{0,400}", max_words in 1usize..40) {
        let doc = document(content);
        prop_assert_eq!(chunk_paragraphs(&doc, max_words), chunk_paragraphs(&doc, max_words));
        prop_assert_eq!(chunk_sentences(&doc), chunk_sentences(&doc));
    }

    #[test]
    fn domain_extraction_is_idempotent(host in "[a-zA-Z0-9.-]{1,40}", path in "[a-z/?#]{0,20}") {
        let url = format!("https://{host}{path}");
        let once = extract_source_domain(&url);
        prop_assert_eq!(extract_source_domain(&once), once.clone());
        prop_assert_eq!(once.to_lowercase(), once);
    }

    #[test]
    fn digests_are_stable_and_content_sensitive(content in ".{1,80}", temperature in 0.0f64..2.0) {
        let request = |c: &str, t: f64| ChatRequest {
            model_name: "m".to_string(),
            messages: vec![ChatMessage { role: Role::User, content: c.to_string() }],
            temperature: t,
            max_output_tokens: 16,
        };
        prop_assert_eq!(
            canonical_digest(&request(&content, 0.0)),
            canonical_digest(&request(&content, 0.0))
        );
        if temperature != 0.0 {
            prop_assert_ne!(
                canonical_digest(&request(&content, 0.0)),
                canonical_digest(&request(&content, temperature))
            );
        }
    }

    #[test]
    fn majority_vote_ignores_candidate_order(mut answers in prop::collection::vec(any::<bool>(), 1..12)) {
        let to_candidates = |answers: &[bool]| -> Vec<CandidateAnswer> {
            answers
                .iter()
                .map(|&yes| CandidateAnswer {
                    answer: if yes { Answer::Yes } else { Answer::No },
                    rationale: None,
                    passage_ref: None,
                })
                .collect()
        };
        let forward = majority_vote(&to_candidates(&answers), TiePolicy::No).unwrap();
        answers.reverse();
        let backward = majority_vote(&to_candidates(&answers), TiePolicy::No).unwrap();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn scoring_ignores_verdict_order(labels in prop::collection::vec((any::<bool>(), 0u8..3), 1..30)) {
        let gold: Vec<ClaimRecord> = labels
            .iter()
            .enumerate()
            .map(|(i, (yes, _))| ClaimRecord {
                claim_id: format!("c{i}"),
                claim: "c".to_string(),
                question: "q?".to_string(),
                claim_date: None,
                gold_answer: if *yes { GoldAnswer::Yes } else { GoldAnswer::No },
                origin: Origin::Other,
                split: Split::ModC,
                documents: Vec::new(),
            })
            .collect();
        let mut verdicts: Vec<Verdict> = labels
            .iter()
            .enumerate()
            .map(|(i, (_, predicted))| Verdict {
                claim_id: format!("c{i}"),
                strategy: Strategy::DirA,
                answer: match predicted {
                    0 => ParsedAnswer::Yes,
                    1 => ParsedAnswer::No,
                    _ => ParsedAnswer::Unparseable,
                },
                candidates: Vec::new(),
                raw_responses: Vec::new(),
                token_usage: None,
                note: None,
            })
            .collect();
        let forward = score(&verdicts, &gold).unwrap();
        verdicts.reverse();
        let backward = score(&verdicts, &gold).unwrap();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn top_k_ranks_are_a_prefix_permutation(
        texts in prop::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,12}", 1..15),
        top_k in 1usize..20,
        query in "[a-z]{1,8}( [a-z]{1,8}){0,4}",
    ) {
        let passages: Vec<confact::chunking::Passage> = texts
            .iter()
            .enumerate()
            .map(|(i, text)| confact::chunking::Passage {
                passage_id: format!("p{i}"),
                parent_doc_id: format!("d{i}"),
                source_domain: format!("s{i}.example"),
                text: text.clone(),
                word_count: text.split_whitespace().count(),
                granularity: Granularity::Paragraph,
                char_span: (0, text.len()),
            })
            .collect();
        let config = RankingConfig { top_k, ..RankingConfig::default() };
        let ranked = fuse_and_rank(&query, &passages, &HashMap::new(), &config).unwrap();
        prop_assert_eq!(ranked.len(), top_k.min(passages.len()));
        for (i, entry) in ranked.iter().enumerate() {
            prop_assert_eq!(entry.rank, i + 1);
        }
        let mut fused: Vec<f64> = ranked.iter().map(|r| r.s_fused).collect();
        let mut sorted = fused.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(std::mem::take(&mut fused), sorted);
    }

    #[test]
    fn soft_and_hard_agree_on_binary_credibility(
        texts in prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,8}", 2..10),
        bits in prop::collection::vec(any::<bool>(), 10),
        query in "[a-z]{1,6}",
    ) {
        // With every credibility score at 0 or 1 and gamma in (0, 1], the soft
        // and hard fusions coincide, so orders match exactly.
        let passages: Vec<confact::chunking::Passage> = texts
            .iter()
            .enumerate()
            .map(|(i, text)| confact::chunking::Passage {
                passage_id: format!("p{i}"),
                parent_doc_id: format!("d{i}"),
                source_domain: format!("s{i}.example"),
                text: text.clone(),
                word_count: text.split_whitespace().count(),
                granularity: Granularity::Paragraph,
                char_span: (0, text.len()),
            })
            .collect();
        let backgrounds: HashMap<String, SourceBackground> = passages
            .iter()
            .enumerate()
            .map(|(i, p)| {
                // Degenerate {0, 1} credibility makes the soft addend equal
                // the hard indicator bit for bit.
                let score = if bits[i % bits.len()] { 1.0 } else { 0.0 };
                (
                    p.source_domain.clone(),
                    SourceBackground {
                        source_domain: p.source_domain.clone(),
                        description: String::new(),
                        level: Some(CredibilityLevel::Medium),
                        score: Some(score),
                        provenance: Provenance::Curated,
                    },
                )
            })
            .collect();
        let soft = fuse_and_rank(
            &query,
            &passages,
            &backgrounds,
            &RankingConfig { mode: RankingMode::CwSoft, top_k: passages.len(), ..RankingConfig::default() },
        ).unwrap();
        let hard = fuse_and_rank(
            &query,
            &passages,
            &backgrounds,
            &RankingConfig { mode: RankingMode::CwHard, gamma: 0.5, top_k: passages.len(), ..RankingConfig::default() },
        ).unwrap();
        let ids = |v: &[confact::ranking::RankedPassage]| -> Vec<String> {
            v.iter().map(|r| r.passage.passage_id.clone()).collect()
        };
        prop_assert_eq!(ids(&soft), ids(&hard));
    }

    #[test]
    fn constant_predictor_macro_f1_trails_accuracy(n_minority in 1usize..20, extra in 1usize..40) {
        // Majority class strictly dominates; the constant majority-class
        // predictor then scores strictly lower macro-F1 than accuracy.
        let n_majority = n_minority + extra;
        let gold: Vec<ClaimRecord> = (0..n_minority + n_majority)
            .map(|i| ClaimRecord {
                claim_id: format!("c{i}"),
                claim: "c".to_string(),
                question: "q?".to_string(),
                claim_date: None,
                gold_answer: if i < n_minority { GoldAnswer::Yes } else { GoldAnswer::No },
                origin: Origin::Other,
                split: Split::ModC,
                documents: Vec::new(),
            })
            .collect();
        let verdicts: Vec<Verdict> = gold
            .iter()
            .map(|record| Verdict {
                claim_id: record.claim_id.clone(),
                strategy: Strategy::DirA,
                answer: ParsedAnswer::No,
                candidates: Vec::new(),
                raw_responses: Vec::new(),
                token_usage: None,
                note: None,
            })
            .collect();
        let card = score(&verdicts, &gold).unwrap();
        prop_assert!(card.macro_f1 < card.accuracy);
    }

    #[test]
    fn dataset_records_round_trip(claim_text in ".{1,120}", content in ".{0,200}", yes in any::<bool>()) {
        let record = ClaimRecord {
            claim_id: "rt-1".to_string(),
            claim: claim_text,
            question: "Is it so?".to_string(),
            claim_date: None,
            gold_answer: if yes { GoldAnswer::Yes } else { GoldAnswer::No },
            origin: Origin::FactCheckQa,
            split: Split::HumC,
            documents: vec![EvidenceDocument {
                doc_id: "d1".to_string(),
                url: "https://example.com/a".to_string(),
                archived_url: None,
                source_domain: "example.com".to_string(),
                content,
                model_stance: None,
                human_stance: None,
                human_credibility: Some(3),
                source_type: None,
            }],
        };
        let line = serde_json::to_string(&record).unwrap();
        prop_assert!(!line.contains('\n'), "JSONL lines must stay single-line");
        let parsed: ClaimRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(parsed, record);
    }
}
