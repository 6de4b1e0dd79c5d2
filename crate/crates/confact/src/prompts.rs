//! Prompt templates and rendering.
//!
//! Templates live as text assets with `{name}` slots and are checksummed in
//! tests so drift is detectable. Rendering is a single pass: substituted
//! values are never re-scanned for slots.

use std::collections::HashMap;

use crate::credibility::SourceBackground;
use crate::error::{Error, Result};
use crate::generation::{Answer, Strategy};
use crate::ranking::RankedPassage;

pub const SYSTEM_BASELINE: &str = include_str!("../assets/prompts/system_baseline.txt");
pub const SYSTEM_SBA: &str = include_str!("../assets/prompts/system_sba.txt");
const DIRA_TEMPLATE: &str = include_str!("../assets/prompts/dira.txt");
const COT_TEMPLATE: &str = include_str!("../assets/prompts/cot.txt");
const DISA_TEMPLATE: &str = include_str!("../assets/prompts/disa.txt");
const SBA_DIR_TEMPLATE: &str = include_str!("../assets/prompts/sba_dir.txt");
const SBA_COT_TEMPLATE: &str = include_str!("../assets/prompts/sba_cot.txt");
const SBA_EXP_TEMPLATE: &str = include_str!("../assets/prompts/sba_exp.txt");
const SBA_ENS_STAGE1_TEMPLATE: &str = include_str!("../assets/prompts/sba_ens_stage1.txt");
const SBA_ENS_STAGE2_TEMPLATE: &str = include_str!("../assets/prompts/sba_ens_stage2.txt");
const QUESTION_CONVERSION_TEMPLATE: &str = include_str!("../assets/prompts/question_conversion.txt");

/// System and user text of one chat call.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Substitute `{name}` slots in a single pass. Unknown slots stay literal.
pub fn render(template: &str, slots: &[(&str, &str)]) -> String {
    let map: HashMap<&str, &str> = slots.iter().copied().collect();
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match map.get(name) {
                    Some(value) => out.push_str(value),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn background_text(domain: &str, backgrounds: &HashMap<String, SourceBackground>) -> String {
    backgrounds
        .get(domain)
        .map(SourceBackground::prompt_text)
        .unwrap_or_else(|| crate::credibility::NO_BACKGROUND_TEXT.to_string())
}

fn evidence_blocks(
    passages: &[RankedPassage],
    backgrounds: Option<&HashMap<String, SourceBackground>>,
) -> String {
    let mut blocks = String::new();
    for (i, ranked) in passages.iter().enumerate() {
        blocks.push_str(&format!("Evidence {}: {}\n", i + 1, ranked.passage.text));
        if let Some(backgrounds) = backgrounds {
            blocks.push_str(&format!(
                "Source Media Description: {}\n",
                background_text(&ranked.passage.source_domain, backgrounds)
            ));
        }
    }
    blocks
}

fn joint_prompt(
    template: &str,
    system: &str,
    question: &str,
    passages: &[RankedPassage],
    backgrounds: Option<&HashMap<String, SourceBackground>>,
) -> Prompt {
    let blocks = evidence_blocks(passages, backgrounds);
    Prompt {
        system: system.trim_end().to_string(),
        user: render(
            template,
            &[("question", question), ("evidence_blocks", blocks.as_str())],
        )
        .trim_end()
        .to_string(),
    }
}

fn single_passage_prompt(question: &str, ranked: &RankedPassage) -> Prompt {
    joint_prompt(
        DIRA_TEMPLATE,
        SYSTEM_BASELINE,
        question,
        std::slice::from_ref(ranked),
        None,
    )
}

fn ensemble_stage1_prompt(
    question: &str,
    ranked: &RankedPassage,
    backgrounds: &HashMap<String, SourceBackground>,
) -> Prompt {
    Prompt {
        system: SYSTEM_SBA.trim_end().to_string(),
        user: render(
            SBA_ENS_STAGE1_TEMPLATE,
            &[
                ("question", question),
                ("evidence", ranked.passage.text.as_str()),
                (
                    "background",
                    background_text(&ranked.passage.source_domain, backgrounds).as_str(),
                ),
            ],
        )
        .trim_end()
        .to_string(),
    }
}

/// One stage-1 result feeding the ensemble's final call.
#[derive(Debug, Clone)]
pub struct EnsembleItem {
    pub passage_text: String,
    pub answer: Answer,
    pub rationale: String,
}

/// Build the ensemble stage-2 prompt over all stage-1 answers and rationales.
pub fn build_ensemble_final_prompt(question: &str, items: &[EnsembleItem]) -> Prompt {
    let mut supporting = String::new();
    let mut refuting = String::new();
    for item in items {
        let block = format!(
            "- Sentence: {}\n- Answer: {}\n- Credibility Analysis: {}\n",
            item.passage_text,
            item.answer,
            item.rationale
        );
        match item.answer {
            Answer::Yes => supporting.push_str(&block),
            Answer::No => refuting.push_str(&block),
        }
    }
    Prompt {
        system: SYSTEM_SBA.trim_end().to_string(),
        user: render(
            SBA_ENS_STAGE2_TEMPLATE,
            &[
                ("question", question),
                ("supporting_blocks", supporting.as_str()),
                ("refuting_blocks", refuting.as_str()),
            ],
        )
        .trim_end()
        .to_string(),
    }
}

/// Build the prompt(s) a strategy issues for one claim.
///
/// Joint strategies return one prompt; MajV returns one single-passage prompt
/// per ranked passage; SBA ensemble returns its stage-1 prompts (the stage-2
/// prompt depends on stage-1 outputs, see [`build_ensemble_final_prompt`]).
pub fn build_prompts(
    strategy: Strategy,
    question: &str,
    passages: &[RankedPassage],
    backgrounds: &HashMap<String, SourceBackground>,
) -> Result<Vec<Prompt>> {
    if passages.is_empty() {
        return Err(Error::NoAdmissibleEvidence {
            claim_id: String::new(),
        });
    }
    if question.trim().is_empty() {
        return Err(Error::Precondition("question text is empty".to_string()));
    }
    let prompts = match strategy {
        Strategy::DirA => vec![joint_prompt(
            DIRA_TEMPLATE,
            SYSTEM_BASELINE,
            question,
            passages,
            None,
        )],
        Strategy::DisA => vec![joint_prompt(
            DISA_TEMPLATE,
            SYSTEM_BASELINE,
            question,
            passages,
            None,
        )],
        Strategy::CoT => vec![joint_prompt(
            COT_TEMPLATE,
            SYSTEM_BASELINE,
            question,
            passages,
            None,
        )],
        Strategy::MajV => passages
            .iter()
            .map(|p| single_passage_prompt(question, p))
            .collect(),
        Strategy::SbaDir => vec![joint_prompt(
            SBA_DIR_TEMPLATE,
            SYSTEM_SBA,
            question,
            passages,
            Some(backgrounds),
        )],
        Strategy::SbaCoT => vec![joint_prompt(
            SBA_COT_TEMPLATE,
            SYSTEM_SBA,
            question,
            passages,
            Some(backgrounds),
        )],
        Strategy::SbaExp => vec![joint_prompt(
            SBA_EXP_TEMPLATE,
            SYSTEM_SBA,
            question,
            passages,
            Some(backgrounds),
        )],
        Strategy::SbaEns => passages
            .iter()
            .map(|p| ensemble_stage1_prompt(question, p, backgrounds))
            .collect(),
    };
    Ok(prompts)
}

/// Prompt asking the backend to reword a claim as a binary question.
pub fn question_conversion_prompt(claim_text: &str) -> Prompt {
    Prompt {
        system: "You are an expert in fact-checking.".to_string(),
        user: render(QUESTION_CONVERSION_TEMPLATE, &[("claim", claim_text)])
            .trim_end()
            .to_string(),
    }
}
