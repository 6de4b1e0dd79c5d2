//! Passage ranking: BM25 relevance, source filtering and credibility fusion.
//!
//! Relevance is Okapi BM25 with k1 = 1.2, b = 0.75 over a per-claim corpus.
//! Raw scores are min-max normalized to [0, 1] before fusion so the beta
//! weight acts on comparable magnitudes. Fusion adds beta times either the
//! raw credibility score (soft) or a gamma-thresholded indicator (hard).

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::chunking::{Granularity, Passage};
use crate::credibility::{CredibilityLevel, SourceBackground};
use crate::error::{Error, Result};

/// Term saturation parameter.
pub const BM25_K1: f64 = 1.2;
/// Length normalization parameter.
pub const BM25_B: f64 = 0.75;

/// How credibility enters the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMode {
    /// BM25 only.
    RelevanceOnly,
    /// Drop passages from low-credibility sources, then rank by BM25.
    Sf,
    /// Fuse `s_rel_norm + beta * s_cred`.
    CwSoft,
    /// Fuse `s_rel_norm + beta * [s_cred >= gamma]`.
    CwHard,
}

impl std::fmt::Display for RankingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankingMode::RelevanceOnly => write!(f, "rel"),
            RankingMode::Sf => write!(f, "sf"),
            RankingMode::CwSoft => write!(f, "cw-soft"),
            RankingMode::CwHard => write!(f, "cw-hard"),
        }
    }
}

impl std::str::FromStr for RankingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rel" | "relevance" => Ok(RankingMode::RelevanceOnly),
            "sf" => Ok(RankingMode::Sf),
            "cw-soft" | "cwsoft" => Ok(RankingMode::CwSoft),
            "cw-hard" | "cwhard" => Ok(RankingMode::CwHard),
            other => Err(Error::Config(format!("unknown ranking mode `{other}`"))),
        }
    }
}

/// What to do with passages whose source has no background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingBackgroundPolicy {
    #[default]
    Keep,
    Drop,
}

/// Ranking parameters. Defaults follow the pipeline's reference settings:
/// top 5 passages, beta 0.8, gamma 0.3, paragraph granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub top_k: usize,
    pub beta: f64,
    pub gamma: f64,
    pub mode: RankingMode,
    pub granularity: Granularity,
    #[serde(default)]
    pub missing_background_policy: MissingBackgroundPolicy,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            top_k: 5,
            beta: 0.8,
            gamma: 0.3,
            mode: RankingMode::RelevanceOnly,
            granularity: Granularity::Paragraph,
            missing_background_policy: MissingBackgroundPolicy::Keep,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k < 1 {
            return Err(Error::Config("top_k must be at least 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.beta < 0.0 {
            return Err(Error::Config(format!("beta {} is negative", self.beta)));
        }
        Ok(())
    }
}

/// A passage with its relevance, credibility and fused scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPassage {
    pub passage: Passage,
    /// Raw Okapi BM25 score.
    pub s_rel: f64,
    /// Min-max normalized relevance within the claim's passage set.
    pub s_rel_norm: f64,
    pub s_cred: Option<f64>,
    pub s_fused: f64,
    /// 1-based position after selection.
    pub rank: usize,
}

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

/// Term and document statistics over the passage set being ranked.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    doc_count: usize,
    avg_len: f64,
    doc_freq: HashMap<String, usize>,
}

/// Build statistics over a per-claim passage corpus.
pub fn build_corpus_stats(passages: &[Passage]) -> CorpusStats {
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    let mut total_len = 0usize;
    for passage in passages {
        let tokens = tokenize(&passage.text);
        total_len += tokens.len();
        let unique: HashSet<String> = tokens.into_iter().collect();
        for token in unique {
            *doc_freq.entry(token).or_insert(0) += 1;
        }
    }
    CorpusStats {
        doc_count: passages.len(),
        avg_len: if passages.is_empty() {
            0.0
        } else {
            total_len as f64 / passages.len() as f64
        },
        doc_freq,
    }
}

/// Okapi BM25 score of a passage for a query, summed over distinct query terms.
pub fn bm25_score(query: &str, passage: &Passage, stats: &CorpusStats) -> f64 {
    if stats.doc_count == 0 || stats.avg_len == 0.0 {
        return 0.0;
    }
    let tokens = tokenize(&passage.text);
    let doc_len = tokens.len() as f64;
    let mut term_freq: HashMap<&str, usize> = HashMap::new();
    for token in &tokens {
        *term_freq.entry(token.as_str()).or_insert(0) += 1;
    }
    let n = stats.doc_count as f64;
    // Sorted unique terms keep float summation order (and thus scores)
    // identical across processes.
    let mut query_terms = tokenize(query);
    query_terms.sort_unstable();
    query_terms.dedup();
    let mut score = 0.0;
    for term in &query_terms {
        let tf = *term_freq.get(term.as_str()).unwrap_or(&0) as f64;
        if tf == 0.0 {
            continue;
        }
        let df = *stats.doc_freq.get(term).unwrap_or(&0) as f64;
        let idf = ((n - df + 0.5) / (df + 0.5)).ln();
        let tf_component =
            (tf * (BM25_K1 + 1.0)) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * doc_len / stats.avg_len));
        score += idf * tf_component;
    }
    score
}

fn source_level(
    passage: &Passage,
    backgrounds: &HashMap<String, SourceBackground>,
) -> Option<CredibilityLevel> {
    backgrounds.get(&passage.source_domain).and_then(|b| b.level)
}

/// Remove passages from low-credibility sources before ranking.
///
/// Sources without a background (or without a level) follow `policy`. If
/// everything is removed the caller must surface a no-admissible-evidence
/// outcome.
pub fn filter_sources(
    passages: &[Passage],
    backgrounds: &HashMap<String, SourceBackground>,
    policy: MissingBackgroundPolicy,
) -> Vec<Passage> {
    passages
        .iter()
        .filter(|p| match source_level(p, backgrounds) {
            Some(CredibilityLevel::Low) => false,
            Some(_) => true,
            None => policy == MissingBackgroundPolicy::Keep,
        })
        .cloned()
        .collect()
}

/// Fused score of one passage given its normalized relevance and credibility.
pub fn fuse_score(
    mode: RankingMode,
    beta: f64,
    gamma: f64,
    s_rel_norm: f64,
    s_cred: Option<f64>,
) -> f64 {
    match mode {
        RankingMode::RelevanceOnly | RankingMode::Sf => s_rel_norm,
        RankingMode::CwSoft => s_rel_norm + beta * s_cred.unwrap_or(0.0),
        RankingMode::CwHard => {
            let indicator = match s_cred {
                Some(score) if score >= gamma => 1.0,
                _ => 0.0,
            };
            s_rel_norm + beta * indicator
        }
    }
}

fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // A degenerate range (single passage, or all scores equal) normalizes
    // to 1.0 so relevance neither dominates nor vanishes in fusion.
    if scores.is_empty() || (max - min) < 1e-12 {
        return vec![1.0; scores.len()];
    }
    scores.iter().map(|s| (s - min) / (max - min)).collect()
}

/// Score, fuse, sort and select the top-k passages for one claim.
///
/// SF filtering happens strictly before scoring, so corpus statistics and
/// normalization only see surviving passages. Ties keep the original passage
/// order. Missing credibility contributes 0 in CW modes.
pub fn fuse_and_rank(
    query: &str,
    passages: &[Passage],
    backgrounds: &HashMap<String, SourceBackground>,
    config: &RankingConfig,
) -> Result<Vec<RankedPassage>> {
    config.validate()?;
    let working: Vec<Passage> = match config.mode {
        RankingMode::Sf => filter_sources(passages, backgrounds, config.missing_background_policy),
        _ => passages.to_vec(),
    };
    if working.is_empty() {
        return Ok(Vec::new());
    }
    let stats = build_corpus_stats(&working);
    let rel: Vec<f64> = working
        .iter()
        .map(|p| bm25_score(query, p, &stats))
        .collect();
    let rel_norm = min_max_normalize(&rel);
    let mut scored: Vec<RankedPassage> = working
        .into_iter()
        .enumerate()
        .map(|(i, passage)| {
            let s_cred = backgrounds.get(&passage.source_domain).and_then(|b| b.score);
            let s_fused = fuse_score(config.mode, config.beta, config.gamma, rel_norm[i], s_cred);
            RankedPassage {
                passage,
                s_rel: rel[i],
                s_rel_norm: rel_norm[i],
                s_cred,
                s_fused,
                rank: 0,
            }
        })
        .collect();
    // Stable sort keeps original passage order on ties.
    scored.sort_by(|a, b| b.s_fused.partial_cmp(&a.s_fused).unwrap_or(std::cmp::Ordering::Equal));
    scored.truncate(config.top_k);
    for (i, entry) in scored.iter_mut().enumerate() {
        entry.rank = i + 1;
    }
    Ok(scored)
}
