//! Verdict generation: strategy execution, answer parsing and aggregation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::ClaimRecord;
use crate::credibility::SourceBackground;
use crate::error::{Error, Result};
use crate::llm::{ChatBackend, ChatMessage, ChatOptions, ChatRequest, FinishReason, Role, TokenUsage};
use crate::prompts::{self, EnsembleItem, Prompt};
use crate::ranking::RankedPassage;

/// The eight answering strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "dira")]
    DirA,
    #[serde(rename = "majv")]
    MajV,
    #[serde(rename = "disa")]
    DisA,
    #[serde(rename = "cot")]
    CoT,
    #[serde(rename = "sba-dir")]
    SbaDir,
    #[serde(rename = "sba-cot")]
    SbaCoT,
    #[serde(rename = "sba-exp")]
    SbaExp,
    #[serde(rename = "sba-ens")]
    SbaEns,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::DirA,
        Strategy::MajV,
        Strategy::DisA,
        Strategy::CoT,
        Strategy::SbaDir,
        Strategy::SbaCoT,
        Strategy::SbaExp,
        Strategy::SbaEns,
    ];

    /// Strategies that render source backgrounds into their prompts.
    pub fn requires_backgrounds(&self) -> bool {
        matches!(
            self,
            Strategy::SbaDir | Strategy::SbaCoT | Strategy::SbaExp | Strategy::SbaEns
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Strategy::DirA => "dira",
            Strategy::MajV => "majv",
            Strategy::DisA => "disa",
            Strategy::CoT => "cot",
            Strategy::SbaDir => "sba-dir",
            Strategy::SbaCoT => "sba-cot",
            Strategy::SbaExp => "sba-exp",
            Strategy::SbaEns => "sba-ens",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dira" => Ok(Strategy::DirA),
            "majv" => Ok(Strategy::MajV),
            "disa" => Ok(Strategy::DisA),
            "cot" => Ok(Strategy::CoT),
            "sba-dir" => Ok(Strategy::SbaDir),
            "sba-cot" => Ok(Strategy::SbaCoT),
            "sba-exp" => Ok(Strategy::SbaExp),
            "sba-ens" => Ok(Strategy::SbaEns),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// A definite yes/no answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => write!(f, "yes"),
            Answer::No => write!(f, "no"),
        }
    }
}

/// A parsed final answer; Unparseable is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParsedAnswer {
    Yes,
    No,
    Unparseable,
}

impl From<Answer> for ParsedAnswer {
    fn from(answer: Answer) -> Self {
        match answer {
            Answer::Yes => ParsedAnswer::Yes,
            Answer::No => ParsedAnswer::No,
        }
    }
}

impl ParsedAnswer {
    pub fn to_answer(self) -> Option<Answer> {
        match self {
            ParsedAnswer::Yes => Some(Answer::Yes),
            ParsedAnswer::No => Some(Answer::No),
            ParsedAnswer::Unparseable => None,
        }
    }
}

/// One per-passage answer with its rationale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAnswer {
    pub answer: Answer,
    #[serde(default)]
    pub rationale: Option<String>,
    #[serde(default)]
    pub passage_ref: Option<String>,
}

/// Final output of one strategy on one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim_id: String,
    pub strategy: Strategy,
    pub answer: ParsedAnswer,
    pub candidates: Vec<CandidateAnswer>,
    pub raw_responses: Vec<String>,
    #[serde(default)]
    pub token_usage: Option<TokenUsage>,
    /// Degradation note, e.g. when no admissible evidence survived ranking.
    #[serde(default)]
    pub note: Option<String>,
}

/// What a tied majority vote resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    Yes,
    /// Refuse to affirm a claim on tied evidence.
    #[default]
    No,
    Error,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "yes" => Ok(TiePolicy::Yes),
            "no" => Ok(TiePolicy::No),
            "error" => Ok(TiePolicy::Error),
            other => Err(Error::Config(format!("unknown tie policy `{other}`"))),
        }
    }
}

/// Knobs for strategy execution.
#[derive(Debug, Clone, Default)]
pub struct GenerationOptions {
    pub chat: ChatOptions,
    pub tie: TiePolicy,
}

impl GenerationOptions {
    pub fn test() -> Self {
        GenerationOptions {
            chat: ChatOptions::test(),
            tie: TiePolicy::No,
        }
    }
}

fn word_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
}

fn first_yes_no(text: &str) -> Option<Answer> {
    for token in word_tokens(text) {
        if token.eq_ignore_ascii_case("yes") {
            return Some(Answer::Yes);
        }
        if token.eq_ignore_ascii_case("no") {
            return Some(Answer::No);
        }
    }
    None
}

const FINAL_ANSWER_MARKER: &str = "final answer";

fn last_marker_end(text: &str) -> Option<usize> {
    let lower = text.to_lowercase();
    lower
        .rfind(FINAL_ANSWER_MARKER)
        .map(|at| at + FINAL_ANSWER_MARKER.len())
}

/// Parse the model's final yes/no answer.
///
/// Reads the first yes/no token after the last "final answer" marker. Without
/// a marker, the whole text must contain exactly one of the two labels as a
/// standalone word.
pub fn parse_final_answer(text: &str) -> ParsedAnswer {
    if let Some(after) = last_marker_end(text) {
        return match first_yes_no(&text[after..]) {
            Some(answer) => answer.into(),
            None => ParsedAnswer::Unparseable,
        };
    }
    let mut saw_yes = false;
    let mut saw_no = false;
    for token in word_tokens(text) {
        if token.eq_ignore_ascii_case("yes") {
            saw_yes = true;
        } else if token.eq_ignore_ascii_case("no") {
            saw_no = true;
        }
    }
    match (saw_yes, saw_no) {
        (true, false) => ParsedAnswer::Yes,
        (false, true) => ParsedAnswer::No,
        _ => ParsedAnswer::Unparseable,
    }
}

/// Rationale part of a reply: the text before the last final-answer marker,
/// or the whole reply when no marker exists.
fn extract_rationale(text: &str) -> String {
    let lower = text.to_lowercase();
    match lower.rfind(FINAL_ANSWER_MARKER) {
        Some(at) => text[..at]
            .trim_end_matches(|c: char| c.is_whitespace() || c == '#' || c == '*')
            .trim()
            .to_string(),
        None => text.trim().to_string(),
    }
}

/// Strict-majority vote over candidate answers.
pub fn majority_vote(candidates: &[CandidateAnswer], tie: TiePolicy) -> Result<Answer> {
    if candidates.is_empty() {
        return Err(Error::NoVotes);
    }
    let yes = candidates.iter().filter(|c| c.answer == Answer::Yes).count();
    let no = candidates.len() - yes;
    match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Ok(Answer::Yes),
        std::cmp::Ordering::Less => Ok(Answer::No),
        std::cmp::Ordering::Equal => match tie {
            TiePolicy::Yes => Ok(Answer::Yes),
            TiePolicy::No => Ok(Answer::No),
            TiePolicy::Error => Err(Error::TiedVote { yes, no }),
        },
    }
}

fn chat_request(prompt: &Prompt, opts: &ChatOptions) -> ChatRequest {
    let mut messages = Vec::with_capacity(2);
    if !prompt.system.is_empty() {
        messages.push(ChatMessage {
            role: Role::System,
            content: prompt.system.clone(),
        });
    }
    messages.push(ChatMessage {
        role: Role::User,
        content: prompt.user.clone(),
    });
    ChatRequest {
        model_name: opts.model.clone(),
        messages,
        // Greedy decoding throughout.
        temperature: 0.0,
        max_output_tokens: opts.max_output_tokens,
    }
}

/// Crude token estimate for the context-length guard.
fn estimate_tokens(prompt: &Prompt) -> usize {
    (prompt.system.len() + prompt.user.len()).div_ceil(4)
}

/// For joint strategies, drop tail passages until the prompt fits the
/// backend's declared context window.
fn fit_to_context<'a>(
    strategy: Strategy,
    question: &str,
    mut passages: &'a [RankedPassage],
    backgrounds: &HashMap<String, SourceBackground>,
    window: Option<usize>,
    claim_id: &str,
) -> Result<(Vec<Prompt>, &'a [RankedPassage])> {
    let mut prompts = prompts::build_prompts(strategy, question, passages, backgrounds)
        .map_err(|e| annotate_claim(e, claim_id))?;
    let Some(window) = window else {
        return Ok((prompts, passages));
    };
    while passages.len() > 1 && prompts.iter().map(estimate_tokens).max().unwrap_or(0) > window {
        passages = &passages[..passages.len() - 1];
        log::warn!(
            "claim {claim_id}: prompt over context window, truncated to {} passages",
            passages.len()
        );
        prompts = prompts::build_prompts(strategy, question, passages, backgrounds)
            .map_err(|e| annotate_claim(e, claim_id))?;
    }
    Ok((prompts, passages))
}

fn annotate_claim(e: Error, claim_id: &str) -> Error {
    match e {
        Error::NoAdmissibleEvidence { .. } => Error::NoAdmissibleEvidence {
            claim_id: claim_id.to_string(),
        },
        other => other.context(format!("claim {claim_id}")),
    }
}

fn accumulate_usage(total: &mut Option<TokenUsage>, usage: Option<TokenUsage>) {
    if let Some(usage) = usage {
        total.get_or_insert_with(TokenUsage::default).add(&usage);
    }
}

/// Execute one strategy on one claim over its ranked passages.
///
/// Joint strategies issue a single call; MajV issues one call per passage and
/// votes; the ensemble issues one call per passage and one final call. All
/// calls use greedy decoding. Unparseable answers are recorded, not thrown;
/// transport errors propagate with the claim id attached.
pub fn run_strategy(
    claim: &ClaimRecord,
    strategy: Strategy,
    ranked: &[RankedPassage],
    backgrounds: &HashMap<String, SourceBackground>,
    backend: &dyn ChatBackend,
    opts: &GenerationOptions,
) -> Result<Verdict> {
    if ranked.is_empty() {
        return Err(Error::NoAdmissibleEvidence {
            claim_id: claim.claim_id.clone(),
        });
    }
    if claim.question.trim().is_empty() {
        return Err(Error::Precondition(format!(
            "claim {} has no question text",
            claim.claim_id
        )));
    }
    let claim_id = claim.claim_id.as_str();
    let (prompts, ranked) = fit_to_context(
        strategy,
        &claim.question,
        ranked,
        backgrounds,
        backend.context_window(),
        claim_id,
    )?;

    let mut raw_responses = Vec::new();
    let mut token_usage = None;
    let mut complete = |prompt: &Prompt| -> Result<(String, FinishReason)> {
        let request = chat_request(prompt, &opts.chat);
        let digest = crate::llm::canonical_digest(&request);
        let started = std::time::Instant::now();
        let response = backend
            .complete(&request)
            .map_err(|e| annotate_claim(e, claim_id))?;
        log::info!(
            target: "confact::calls",
            "digest={digest} claim_id={claim_id} strategy={strategy} latency_ms={}",
            started.elapsed().as_millis()
        );
        accumulate_usage(&mut token_usage, response.usage);
        raw_responses.push(response.text.clone());
        Ok((response.text, response.finish_reason))
    };

    // An unparseable answer from a length-truncated response is length
    // damage, not a model refusal; the note records that.
    let parse_final = |text: &str, finish: FinishReason| -> (ParsedAnswer, Option<String>) {
        let answer = parse_final_answer(text);
        let note = (answer == ParsedAnswer::Unparseable && finish == FinishReason::Length)
            .then(|| "answer unparseable: response hit the output token limit".to_string());
        (answer, note)
    };

    let verdict = match strategy {
        Strategy::DirA
        | Strategy::DisA
        | Strategy::CoT
        | Strategy::SbaDir
        | Strategy::SbaCoT
        | Strategy::SbaExp => {
            let (text, finish) = complete(&prompts[0])?;
            let (answer, note) = parse_final(&text, finish);
            Verdict {
                claim_id: claim_id.to_string(),
                strategy,
                answer,
                candidates: Vec::new(),
                raw_responses,
                token_usage,
                note,
            }
        }
        Strategy::MajV => {
            let mut candidates = Vec::new();
            for (prompt, passage) in prompts.iter().zip(ranked) {
                let (text, _) = complete(prompt)?;
                if let Some(answer) = parse_final_answer(&text).to_answer() {
                    candidates.push(CandidateAnswer {
                        answer,
                        rationale: None,
                        passage_ref: Some(passage.passage.passage_id.clone()),
                    });
                }
            }
            let (answer, note) = match majority_vote(&candidates, opts.tie) {
                Ok(answer) => (answer.into(), None),
                Err(Error::NoVotes) => (
                    ParsedAnswer::Unparseable,
                    Some("no votes: every candidate answer was unparseable".to_string()),
                ),
                Err(e) => return Err(annotate_claim(e, claim_id)),
            };
            Verdict {
                claim_id: claim_id.to_string(),
                strategy,
                answer,
                candidates,
                raw_responses,
                token_usage,
                note,
            }
        }
        Strategy::SbaEns => {
            let mut candidates = Vec::new();
            let mut items = Vec::new();
            for (prompt, passage) in prompts.iter().zip(ranked) {
                let (text, _) = complete(prompt)?;
                if let Some(answer) = parse_final_answer(&text).to_answer() {
                    let rationale = extract_rationale(&text);
                    candidates.push(CandidateAnswer {
                        answer,
                        rationale: Some(rationale.clone()),
                        passage_ref: Some(passage.passage.passage_id.clone()),
                    });
                    items.push(EnsembleItem {
                        passage_text: passage.passage.text.clone(),
                        answer,
                        rationale,
                    });
                }
            }
            let final_prompt = prompts::build_ensemble_final_prompt(&claim.question, &items);
            let (text, finish) = complete(&final_prompt)?;
            let (answer, note) = parse_final(&text, finish);
            Verdict {
                claim_id: claim_id.to_string(),
                strategy,
                answer,
                candidates,
                raw_responses,
                token_usage,
                note,
            }
        }
    };
    Ok(verdict)
}

/// Write verdicts one JSON record per line.
pub fn write_verdicts(path: impl AsRef<std::path::Path>, verdicts: &[Verdict]) -> Result<()> {
    let mut out = String::new();
    for verdict in verdicts {
        out.push_str(&serde_json::to_string(verdict)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a verdict file written by [`write_verdicts`].
pub fn read_verdicts(path: impl AsRef<std::path::Path>) -> Result<Vec<Verdict>> {
    let text = std::fs::read_to_string(path)?;
    let mut verdicts = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let verdict: Verdict = serde_json::from_str(line).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?;
        verdicts.push(verdict);
    }
    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::{Granularity, Passage};
    use crate::corpus::{GoldAnswer, Origin, Split};
    use crate::llm::ScriptedBackend;

    fn claim(question: &str) -> ClaimRecord {
        ClaimRecord {
            claim_id: "c1".to_string(),
            claim: "some claim".to_string(),
            question: question.to_string(),
            claim_date: None,
            gold_answer: GoldAnswer::No,
            origin: Origin::Other,
            split: Split::ModC,
            documents: Vec::new(),
        }
    }

    fn ranked(id: &str, text: &str) -> RankedPassage {
        RankedPassage {
            passage: Passage {
                passage_id: id.to_string(),
                parent_doc_id: "d1".to_string(),
                source_domain: "example.com".to_string(),
                text: text.to_string(),
                word_count: text.split_whitespace().count(),
                granularity: Granularity::Paragraph,
                char_span: (0, text.len()),
            },
            s_rel: 0.0,
            s_rel_norm: 1.0,
            s_cred: None,
            s_fused: 1.0,
            rank: 1,
        }
    }

    fn candidates(answers: &[Answer]) -> Vec<CandidateAnswer> {
        answers
            .iter()
            .map(|a| CandidateAnswer {
                answer: *a,
                rationale: None,
                passage_ref: None,
            })
            .collect()
    }

    #[test]
    fn parse_reads_after_last_marker() {
        assert_eq!(
            parse_final_answer("Analysis: mixed evidence.\n#*# Final Answer: yes"),
            ParsedAnswer::Yes
        );
        assert_eq!(parse_final_answer("FINAL ANSWER: No."), ParsedAnswer::No);
        assert_eq!(
            parse_final_answer("Final answer: yes. Wait. Final Answer: no"),
            ParsedAnswer::No
        );
        assert_eq!(
            parse_final_answer("Final Answer: I cannot tell"),
            ParsedAnswer::Unparseable
        );
    }

    #[test]
    fn parse_falls_back_to_unique_standalone_token() {
        assert_eq!(parse_final_answer("Yes."), ParsedAnswer::Yes);
        assert_eq!(parse_final_answer("The answer is no, clearly."), ParsedAnswer::No);
        assert_eq!(parse_final_answer("It is unclear."), ParsedAnswer::Unparseable);
        // "Noble" and "yesterday" are not standalone yes/no tokens.
        assert_eq!(parse_final_answer("A noble yesterday."), ParsedAnswer::Unparseable);
        // Both labels present without a marker is ambiguous.
        assert_eq!(parse_final_answer("yes or no"), ParsedAnswer::Unparseable);
    }

    #[test]
    fn majority_vote_follows_strict_majority_and_tie_policy() {
        let votes = candidates(&[Answer::Yes, Answer::Yes, Answer::No, Answer::Yes, Answer::No]);
        assert_eq!(majority_vote(&votes, TiePolicy::No).unwrap(), Answer::Yes);
        let tie = candidates(&[Answer::Yes, Answer::No]);
        assert_eq!(majority_vote(&tie, TiePolicy::No).unwrap(), Answer::No);
        assert_eq!(majority_vote(&tie, TiePolicy::Yes).unwrap(), Answer::Yes);
        assert!(matches!(
            majority_vote(&tie, TiePolicy::Error),
            Err(Error::TiedVote { yes: 1, no: 1 })
        ));
        assert!(matches!(majority_vote(&[], TiePolicy::No), Err(Error::NoVotes)));
    }

    #[test]
    fn majority_vote_is_permutation_invariant() {
        let base = [Answer::Yes, Answer::No, Answer::Yes];
        let orders = [
            [Answer::Yes, Answer::Yes, Answer::No],
            [Answer::No, Answer::Yes, Answer::Yes],
            base,
        ];
        for order in orders {
            assert_eq!(
                majority_vote(&candidates(&order), TiePolicy::No).unwrap(),
                Answer::Yes
            );
        }
    }

    #[test]
    fn majv_collects_candidates_and_votes() {
        let passages = vec![ranked("p1", "Alpha."), ranked("p2", "Beta."), ranked("p3", "Gamma.")];
        let backend = ScriptedBackend::new()
            .rule(["Alpha."], "yes")
            .rule(["Beta."], "yes")
            .rule(["Gamma."], "no");
        let verdict = run_strategy(
            &claim("Q?"),
            Strategy::MajV,
            &passages,
            &HashMap::new(),
            &backend,
            &GenerationOptions::test(),
        )
        .unwrap();
        assert_eq!(verdict.answer, ParsedAnswer::Yes);
        assert_eq!(verdict.candidates.len(), 3);
        assert_eq!(backend.calls(), 3);
        assert_eq!(verdict.raw_responses.len(), 3);
    }

    #[test]
    fn majv_all_unparseable_records_note() {
        let passages = vec![ranked("p1", "Alpha."), ranked("p2", "Beta.")];
        let backend = ScriptedBackend::always("cannot tell");
        let verdict = run_strategy(
            &claim("Q?"),
            Strategy::MajV,
            &passages,
            &HashMap::new(),
            &backend,
            &GenerationOptions::test(),
        )
        .unwrap();
        assert_eq!(verdict.answer, ParsedAnswer::Unparseable);
        assert!(verdict.note.is_some());
        assert!(verdict.candidates.is_empty());
    }

    #[test]
    fn ensemble_runs_stage1_per_passage_and_one_final_call() {
        let passages = vec![ranked("p1", "Alpha sentence."), ranked("p2", "Beta sentence.")];
        let backend = ScriptedBackend::new()
            .rule(["Supporting Evidence:"], "Final Answer: no")
            .rule(["Alpha sentence."], "Alpha looks right. Final Answer: yes")
            .rule(["Beta sentence."], "Beta is wrong. Final Answer: no");
        let verdict = run_strategy(
            &claim("Q?"),
            Strategy::SbaEns,
            &passages,
            &HashMap::new(),
            &backend,
            &GenerationOptions::test(),
        )
        .unwrap();
        assert_eq!(backend.calls(), passages.len() + 1);
        assert_eq!(verdict.answer, ParsedAnswer::No);
        assert_eq!(verdict.candidates.len(), 2);
        assert_eq!(verdict.candidates[0].rationale.as_deref(), Some("Alpha looks right."));
        assert_eq!(verdict.raw_responses.len(), 3);
    }

    #[test]
    fn joint_strategies_issue_one_call() {
        for strategy in [Strategy::DirA, Strategy::DisA, Strategy::CoT] {
            let backend = ScriptedBackend::always("no");
            let verdict = run_strategy(
                &claim("Q?"),
                strategy,
                &[ranked("p1", "Text."), ranked("p2", "More.")],
                &HashMap::new(),
                &backend,
                &GenerationOptions::test(),
            )
            .unwrap();
            assert_eq!(backend.calls(), 1);
            assert_eq!(verdict.answer, ParsedAnswer::No);
        }
    }

    #[test]
    fn empty_ranked_list_is_no_admissible_evidence() {
        let backend = ScriptedBackend::always("yes");
        let err = run_strategy(
            &claim("Q?"),
            Strategy::DirA,
            &[],
            &HashMap::new(),
            &backend,
            &GenerationOptions::test(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleEvidence { .. }));
    }

    #[test]
    fn context_guard_truncates_tail_passages() {
        struct Windowed(ScriptedBackend);
        impl ChatBackend for Windowed {
            fn complete(&self, request: &ChatRequest) -> Result<crate::llm::ChatResponse> {
                self.0.complete(request)
            }
            fn context_window(&self) -> Option<usize> {
                Some(60)
            }
        }
        let long = "word ".repeat(50);
        let backend = Windowed(ScriptedBackend::always("no"));
        let verdict = run_strategy(
            &claim("Q?"),
            Strategy::DirA,
            &[ranked("p1", &long), ranked("p2", &long), ranked("p3", "Short.")],
            &HashMap::new(),
            &backend,
            &GenerationOptions::test(),
        )
        .unwrap();
        assert_eq!(backend.0.calls(), 1);
        assert_eq!(verdict.answer, ParsedAnswer::No);
    }

    #[test]
    fn truncated_unparseable_response_is_flagged() {
        struct Truncating;
        impl ChatBackend for Truncating {
            fn complete(&self, _request: &ChatRequest) -> crate::error::Result<crate::llm::ChatResponse> {
                Ok(crate::llm::ChatResponse {
                    text: "Analysis: the evidence shows".to_string(),
                    finish_reason: FinishReason::Length,
                    usage: None,
                })
            }
        }
        let verdict = run_strategy(
            &claim("Q?"),
            Strategy::CoT,
            &[ranked("p1", "Text.")],
            &HashMap::new(),
            &Truncating,
            &GenerationOptions::test(),
        )
        .unwrap();
        assert_eq!(verdict.answer, ParsedAnswer::Unparseable);
        assert!(verdict.note.as_deref().unwrap().contains("token limit"));
    }

    #[test]
    fn verdicts_round_trip_through_jsonl() {
        let verdicts = vec![Verdict {
            claim_id: "c1".to_string(),
            strategy: Strategy::SbaCoT,
            answer: ParsedAnswer::Yes,
            candidates: candidates(&[Answer::Yes]),
            raw_responses: vec!["Final Answer: yes".to_string()],
            token_usage: None,
            note: None,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verdicts.jsonl");
        write_verdicts(&path, &verdicts).unwrap();
        assert_eq!(read_verdicts(&path).unwrap(), verdicts);
    }
}
