//! Stage-1 stance annotation and conflict detection.
//!
//! Each document is labeled by up to three prompt variants (URL only, scraped
//! content, content with justification); the final stance is a strict
//! majority over the variants that could run, falling back to
//! NotEnoughEvidence on splits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClaimRecord, EvidenceDocument, Stance};
use crate::error::{Error, Result};
use crate::llm::{ChatBackend, ChatMessage, ChatOptions, ChatRequest, Role};
use crate::prompts::render;

const SYSTEM_TEMPLATE: &str = include_str!("../assets/prompts/annotation_system.txt");
const URL_TEMPLATE: &str = include_str!("../assets/prompts/annotation_url.txt");
const CONTENT_TEMPLATE: &str = include_str!("../assets/prompts/annotation_content.txt");
const JUSTIFIED_TEMPLATE: &str = include_str!("../assets/prompts/annotation_justified.txt");

/// The three annotation prompt variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationVariant {
    /// Stance from the document URL alone.
    UrlOnly,
    /// Stance from the scraped content.
    Content,
    /// Reasoning first, then a "Final answer:" stance.
    ContentJustified,
}

impl AnnotationVariant {
    pub const ALL: [AnnotationVariant; 3] = [
        AnnotationVariant::UrlOnly,
        AnnotationVariant::Content,
        AnnotationVariant::ContentJustified,
    ];
}

/// Per-document annotation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceAnnotation {
    pub doc_id: String,
    pub labels: BTreeMap<AnnotationVariant, Stance>,
    #[serde(default)]
    pub justification: Option<String>,
    pub final_stance: Stance,
}

fn claim_date_text(claim: &ClaimRecord) -> String {
    claim
        .claim_date
        .map(|d| d.to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Parse a stance label from a reply.
///
/// Accepts the bare label (with list dashes or trailing punctuation) and, for
/// justified replies, the label after the last "Final answer:" marker. A
/// reply mentioning no label, or more than one, is a parse error.
fn parse_stance(text: &str) -> Result<Stance> {
    let lower = text.to_lowercase();
    let tail = match lower.rfind("final answer") {
        Some(at) => &lower[at..],
        None => lower.as_str(),
    };
    let support = tail.contains("support");
    let reject = tail.contains("reject");
    let nei = tail.contains("not enough evidence");
    match (support, reject, nei) {
        (true, false, false) => Ok(Stance::Support),
        (false, true, false) => Ok(Stance::Reject),
        (false, false, true) => Ok(Stance::NotEnoughEvidence),
        _ => Err(Error::Parse(format!(
            "reply does not name exactly one stance: `{}`",
            text.trim()
        ))),
    }
}

/// Annotate one document with one prompt variant.
///
/// Returns the stance and, for [`AnnotationVariant::ContentJustified`], the
/// reasoning preceding the final answer.
pub fn annotate_stance(
    claim: &ClaimRecord,
    doc: &EvidenceDocument,
    variant: AnnotationVariant,
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
) -> Result<(Stance, Option<String>)> {
    let date = claim_date_text(claim);
    let user = match variant {
        AnnotationVariant::UrlOnly => {
            if doc.url.trim().is_empty() {
                return Err(Error::Precondition(format!(
                    "doc {} has no url for url-only annotation",
                    doc.doc_id
                )));
            }
            render(
                URL_TEMPLATE,
                &[
                    ("claim", claim.claim.as_str()),
                    ("claim_date", date.as_str()),
                    ("evidence_url", doc.url.as_str()),
                ],
            )
        }
        AnnotationVariant::Content | AnnotationVariant::ContentJustified => {
            if doc.content.trim().is_empty() {
                return Err(Error::Precondition(format!(
                    "doc {} has no content for content annotation",
                    doc.doc_id
                )));
            }
            let template = if variant == AnnotationVariant::Content {
                CONTENT_TEMPLATE
            } else {
                JUSTIFIED_TEMPLATE
            };
            render(
                template,
                &[
                    ("claim", claim.claim.as_str()),
                    ("claim_date", date.as_str()),
                    ("evidence_content", doc.content.as_str()),
                ],
            )
        }
    };
    let request = ChatRequest {
        model_name: opts.model.clone(),
        messages: vec![
            ChatMessage {
                role: Role::System,
                content: SYSTEM_TEMPLATE.trim_end().to_string(),
            },
            ChatMessage {
                role: Role::User,
                content: user.trim_end().to_string(),
            },
        ],
        temperature: 0.0,
        max_output_tokens: opts.max_output_tokens,
    };
    let response = backend.complete(&request)?;
    let stance = parse_stance(&response.text)?;
    let justification = if variant == AnnotationVariant::ContentJustified {
        let lower = response.text.to_lowercase();
        let cut = lower.rfind("final answer").unwrap_or(0);
        let reasoning = response.text[..cut].trim();
        (!reasoning.is_empty()).then(|| reasoning.to_string())
    } else {
        None
    };
    Ok((stance, justification))
}

/// Strict-majority stance; anything short of a majority is NotEnoughEvidence.
pub fn majority_stance(labels: &[Stance]) -> Result<Stance> {
    if labels.is_empty() {
        return Err(Error::NoVotes);
    }
    for candidate in [Stance::Support, Stance::Reject, Stance::NotEnoughEvidence] {
        let count = labels.iter().filter(|&&l| l == candidate).count();
        if count * 2 > labels.len() {
            return Ok(candidate);
        }
    }
    Ok(Stance::NotEnoughEvidence)
}

/// Annotate one document with every variant its fields allow, then vote.
///
/// A variant whose precondition fails (missing url or content) is skipped,
/// reducing the vote to the available variants.
pub fn annotate_document(
    claim: &ClaimRecord,
    doc: &EvidenceDocument,
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
) -> Result<StanceAnnotation> {
    let mut labels = BTreeMap::new();
    let mut justification = None;
    for variant in AnnotationVariant::ALL {
        match annotate_stance(claim, doc, variant, backend, opts) {
            Ok((stance, reasoning)) => {
                labels.insert(variant, stance);
                if reasoning.is_some() {
                    justification = reasoning;
                }
            }
            Err(Error::Precondition(reason)) => {
                log::debug!("skipping {variant:?} for doc {}: {reason}", doc.doc_id);
            }
            Err(other) => return Err(other),
        }
    }
    let votes: Vec<Stance> = labels.values().copied().collect();
    let final_stance = majority_stance(&votes)
        .map_err(|_| Error::Precondition(format!("doc {} supports no variant", doc.doc_id)))?;
    Ok(StanceAnnotation {
        doc_id: doc.doc_id.clone(),
        labels,
        justification,
        final_stance,
    })
}

/// Annotate every document of every claim, writing the final stance into
/// `model_stance`. Returns the per-document annotations for audit.
pub fn annotate_dataset(
    records: &mut [ClaimRecord],
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
) -> Result<Vec<StanceAnnotation>> {
    let mut annotations = Vec::new();
    for record in records.iter_mut() {
        let claim = record.clone();
        for doc in &mut record.documents {
            let annotation = annotate_document(&claim, doc, backend, opts)
                .map_err(|e| e.context(format!("claim {}", claim.claim_id)))?;
            doc.model_stance = Some(annotation.final_stance);
            annotations.push(annotation);
        }
    }
    Ok(annotations)
}

/// True iff the claim's documents include at least one Support and one Reject
/// final stance.
pub fn detect_conflicts(claim: &ClaimRecord) -> Result<bool> {
    let mut support = false;
    let mut reject = false;
    for doc in &claim.documents {
        match doc.final_stance() {
            Some(Stance::Support) => support = true,
            Some(Stance::Reject) => reject = true,
            Some(Stance::NotEnoughEvidence) => {}
            None => {
                return Err(Error::Precondition(format!(
                    "doc {} of claim {} carries no stance",
                    doc.doc_id, claim.claim_id
                )))
            }
        }
    }
    Ok(support && reject)
}
