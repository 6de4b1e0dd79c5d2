//! Dataset model, on-disk format, ingestion and validation.
//!
//! A dataset is a UTF-8 file with one JSON record per line. Each record is a
//! claim with its binary verification question, gold answer, split assignment
//! and the list of retrieved evidence documents.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{ChatBackend, ChatMessage, ChatOptions, ChatRequest, Role};
use crate::prompts;

/// Gold answer to the binary verification question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldAnswer {
    Yes,
    No,
}

/// Where the claim was collected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Averitec,
    #[serde(rename = "factcheckqa")]
    FactCheckQa,
    Other,
}

/// Dataset split. ModC holds model-flagged conflicts, HumC human-flagged ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    ModC,
    HumC,
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::ModC => write!(f, "modc"),
            Split::HumC => write!(f, "humc"),
            Split::Unassigned => write!(f, "unassigned"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "modc" => Ok(Split::ModC),
            "humc" => Ok(Split::HumC),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// A document's stance toward its claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Support,
    Reject,
    NotEnoughEvidence,
}

/// Coarse category of the publishing source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    MainstreamNews,
    Government,
    NonProfit,
    Academic,
    SocialMedia,
    Other,
}

/// A retrieved evidence document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDocument {
    pub doc_id: String,
    pub url: String,
    #[serde(default)]
    pub archived_url: Option<String>,
    /// Registrable domain extracted from `url`, lowercased.
    pub source_domain: String,
    pub content: String,
    #[serde(default)]
    pub model_stance: Option<Stance>,
    #[serde(default)]
    pub human_stance: Option<Stance>,
    /// 1 (least credible) ..= 5 (most credible).
    #[serde(default)]
    pub human_credibility: Option<u8>,
    #[serde(default)]
    pub source_type: Option<SourceType>,
}

impl EvidenceDocument {
    /// The stance used downstream: the human label when present, else the
    /// model label.
    pub fn final_stance(&self) -> Option<Stance> {
        self.human_stance.or(self.model_stance)
    }
}

/// A claim with its binary question, gold answer and evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub claim: String,
    /// Binary question the claim was converted into. May be empty in
    /// pre-retrieval datasets; must be non-empty before verification.
    #[serde(default)]
    pub question: String,
    #[serde(default)]
    pub claim_date: Option<NaiveDate>,
    pub gold_answer: GoldAnswer,
    pub origin: Origin,
    pub split: Split,
    #[serde(default)]
    pub documents: Vec<EvidenceDocument>,
}

/// Counts over one split of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_claims: usize,
    pub n_yes: usize,
    pub n_no: usize,
    /// Distinct source domains across all documents of the split.
    pub n_sources: usize,
}

/// One invariant violation found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub record_index: usize,
    pub claim_id: String,
    pub field: String,
    pub message: String,
}

/// All violations found in a dataset. Empty iff the dataset is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "dataset valid: no violations");
        }
        for issue in &self.issues {
            writeln!(
                f,
                "record {} ({}): {}: {}",
                issue.record_index, issue.claim_id, issue.field, issue.message
            )?;
        }
        Ok(())
    }
}

// Two-label public suffixes under which the registrable domain takes three
// labels (e.g. "bbc.co.uk"). Single-label suffixes need no table.
const MULTI_PART_SUFFIXES: &[&str] = &[
    "ac.il", "ac.in", "ac.jp", "ac.kr", "ac.nz", "ac.uk", "ac.za", "asn.au", "co.id", "co.il",
    "co.in", "co.jp", "co.ke", "co.kr", "co.nz", "co.th", "co.uk", "co.za", "com.ar", "com.au",
    "com.br", "com.cn", "com.eg", "com.hk", "com.mx", "com.my", "com.ng", "com.ph", "com.pk",
    "com.pl", "com.sa", "com.sg", "com.tr", "com.tw", "com.ua", "com.vn", "edu.au", "edu.hk",
    "edu.pl", "edu.sg", "go.id", "go.jp", "go.ke", "go.kr", "go.th", "gob.mx", "gov.au",
    "gov.br", "gov.cn", "gov.hk", "gov.il", "gov.in", "gov.my", "gov.ng", "gov.ph", "gov.pl",
    "gov.sg", "gov.tr", "gov.ua", "gov.uk", "gov.za", "govt.nz", "ltd.uk", "me.uk", "ne.jp",
    "net.au", "net.br", "net.cn", "net.in", "net.nz", "net.pl", "net.uk", "or.id", "or.jp",
    "or.ke", "or.kr", "or.th", "org.au", "org.br", "org.cn", "org.hk", "org.il", "org.in",
    "org.mx", "org.nz", "org.pl", "org.sg", "org.tr", "org.uk", "org.za", "plc.uk", "sch.uk",
    "web.za",
];

/// Extract the registrable domain from a URL or bare host, lowercased.
///
/// Idempotent: feeding the result back in returns it unchanged.
pub fn extract_source_domain(url: &str) -> String {
    let s = url.trim();
    // Strip scheme.
    let s = match s.find("://") {
        Some(idx) => &s[idx + 3..],
        None => s,
    };
    // Strip userinfo, then path/query/fragment.
    let authority_end = s.find(['/', '?', '#']).unwrap_or(s.len());
    let authority = &s[..authority_end];
    let host = match authority.rfind('@') {
        Some(idx) => &authority[idx + 1..],
        None => authority,
    };
    // Strip port; keep bracketed IPv6 literals whole.
    let host = if let Some(stripped) = host.strip_prefix('[') {
        stripped.split(']').next().unwrap_or(stripped)
    } else {
        host.split(':').next().unwrap_or(host)
    };
    let host = host.trim_matches('.').to_ascii_lowercase();
    if host.is_empty() {
        return host;
    }
    // IP addresses are their own "domain".
    if host.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ':') {
        return host;
    }
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
    if labels.len() <= 2 {
        return labels.join(".");
    }
    let last_two = labels[labels.len() - 2..].join(".");
    let take = if MULTI_PART_SUFFIXES.binary_search(&last_two.as_str()).is_ok() {
        3
    } else {
        2
    };
    labels[labels.len() - take..].join(".")
}

/// Parse a dataset file without enforcing semantic invariants.
///
/// Syntactic problems (bad JSON, wrong field types) still fail here with the
/// record index; semantic checks (duplicate ids, credibility bounds) are left
/// to [`validate_dataset`].
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<ClaimRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path)
        .map_err(|e| Error::Io(e).context(format!("opening {}", path.display())))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut index = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ClaimRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?;
        records.push(record);
        index += 1;
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.display().to_string(),
        });
    }
    Ok(records)
}

/// Load a dataset and enforce every record-level invariant.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ClaimRecord>> {
    let records = parse_dataset(&path)?;
    let report = validate_dataset(&records);
    if let Some(issue) = report.issues.first() {
        return Err(Error::Record {
            index: issue.record_index,
            message: format!("{}: {}", issue.field, issue.message),
        });
    }
    Ok(records)
}

/// Serialize records to the line-delimited on-disk format.
///
/// Writes a sibling temp file and renames it into place, so in-place
/// rewrites (e.g. annotation) cannot corrupt the dataset.
pub fn write_dataset(path: impl AsRef<Path>, records: &[ClaimRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, out)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Check semantic invariants and report every violation.
pub fn validate_dataset(records: &[ClaimRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashSet<&str> = HashSet::new();
    for (index, record) in records.iter().enumerate() {
        let mut push = |field: &str, message: String| {
            report.issues.push(ValidationIssue {
                record_index: index,
                claim_id: record.claim_id.clone(),
                field: field.to_string(),
                message,
            });
        };
        if record.claim_id.is_empty() {
            push("claim_id", "must not be empty".to_string());
        }
        if record.claim.is_empty() {
            push("claim", "must not be empty".to_string());
        }
        if !seen.insert(record.claim_id.as_str()) {
            push("claim_id", format!("duplicate claim_id `{}`", record.claim_id));
        }
        for doc in &record.documents {
            if let Some(credibility) = doc.human_credibility {
                if !(1..=5).contains(&credibility) {
                    push(
                        "human_credibility",
                        format!("doc {}: {} outside [1, 5]", doc.doc_id, credibility),
                    );
                }
            }
            let expected = extract_source_domain(&doc.url);
            if !expected.is_empty() && doc.source_domain != expected {
                push(
                    "source_domain",
                    format!(
                        "doc {}: `{}` does not match `{}` extracted from url",
                        doc.doc_id, doc.source_domain, expected
                    ),
                );
            }
        }
    }
    report
}

/// Compute counts over the records belonging to `split`.
pub fn split_stats(records: &[ClaimRecord], split: Split) -> DatasetStats {
    let mut stats = DatasetStats {
        n_claims: 0,
        n_yes: 0,
        n_no: 0,
        n_sources: 0,
    };
    let mut sources: HashSet<&str> = HashSet::new();
    for record in records.iter().filter(|r| r.split == split) {
        stats.n_claims += 1;
        match record.gold_answer {
            GoldAnswer::Yes => stats.n_yes += 1,
            GoldAnswer::No => stats.n_no += 1,
        }
        for doc in &record.documents {
            sources.insert(doc.source_domain.as_str());
        }
    }
    stats.n_sources = sources.len();
    stats
}

/// Convert a claim into a binary yes/no question via the backend.
///
/// Returns the question text; the caller stores it into the record.
pub fn convert_claim_to_question(
    claim: &ClaimRecord,
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
) -> Result<String> {
    if claim.claim.is_empty() {
        return Err(Error::Precondition("claim text is empty".to_string()));
    }
    let prompt = prompts::question_conversion_prompt(&claim.claim);
    let request = ChatRequest {
        model_name: opts.model.clone(),
        messages: vec![
            ChatMessage {
                role: Role::System,
                content: prompt.system,
            },
            ChatMessage {
                role: Role::User,
                content: prompt.user,
            },
        ],
        temperature: 0.0,
        max_output_tokens: opts.max_output_tokens,
    };
    let response = backend.complete(&request)?;
    let text = response.text.trim();
    if text.is_empty() {
        return Err(Error::Parse("empty question from backend".to_string()));
    }
    let question_marks = text.matches('?').count();
    if question_marks == 0 || !text.ends_with('?') {
        return Err(Error::Parse(format!(
            "reply is not an interrogative sentence: `{text}`"
        )));
    }
    if question_marks > 1 {
        return Err(Error::Parse(format!(
            "reply contains more than one question: `{text}`"
        )));
    }
    Ok(text.to_string())
}
