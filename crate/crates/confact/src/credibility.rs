//! Source backgrounds and credibility scores.
//!
//! Two providers share one interface: GT looks domains up in a curated table
//! and marks everything else missing; Hybrid additionally generates a
//! background with an LLM for uncurated domains, classifies it into a
//! three-way level and maps the level onto a fixed score.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::corpus::extract_source_domain;
use crate::error::{Error, Result};
use crate::llm::{ChatBackend, ChatMessage, ChatOptions, ChatRequest, Role};
use crate::prompts::render;

const CLASSIFY_LEVEL_TEMPLATE: &str = include_str!("../assets/prompts/classify_level.txt");
const GENERATION_TEMPLATE: &str = include_str!("../assets/prompts/background_generation.txt");
const DEFAULT_QUERIES: &str = include_str!("../assets/queries.txt");
const DEFAULT_EXEMPLARS: &str = include_str!("../assets/level_exemplars.json");

/// Placeholder rendered into prompts when a source has no background.
pub const NO_BACKGROUND_TEXT: &str = "No background available for this source.";

/// Three-way credibility level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CredibilityLevel {
    Low,
    Medium,
    High,
}

impl std::fmt::Display for CredibilityLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CredibilityLevel::Low => write!(f, "low"),
            CredibilityLevel::Medium => write!(f, "medium"),
            CredibilityLevel::High => write!(f, "high"),
        }
    }
}

impl std::str::FromStr for CredibilityLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(CredibilityLevel::Low),
            "medium" => Ok(CredibilityLevel::Medium),
            "high" => Ok(CredibilityLevel::High),
            other => Err(Error::Parse(format!("unknown credibility level `{other}`"))),
        }
    }
}

/// Fixed level-to-score mapping standing in for a learned regressor.
pub fn level_to_score(level: CredibilityLevel) -> f64 {
    match level {
        CredibilityLevel::Low => 0.1,
        CredibilityLevel::Medium => 0.5,
        CredibilityLevel::High => 0.9,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Curated,
    Generated,
    Missing,
}

/// Background profile of one media source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBackground {
    pub source_domain: String,
    pub description: String,
    pub level: Option<CredibilityLevel>,
    /// Credibility score in (0, 1) when known.
    pub score: Option<f64>,
    pub provenance: Provenance,
}

impl SourceBackground {
    pub fn missing(domain: impl Into<String>) -> Self {
        SourceBackground {
            source_domain: domain.into(),
            description: String::new(),
            level: None,
            score: None,
            provenance: Provenance::Missing,
        }
    }

    /// The text SBA prompts render for this source.
    pub fn prompt_text(&self) -> String {
        if !self.description.is_empty() {
            return self.description.clone();
        }
        match self.level {
            Some(level) => format!(
                "This source is rated {level} credibility by a curated media reliability table."
            ),
            None => NO_BACKGROUND_TEXT.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub level: CredibilityLevel,
    pub score: Option<f64>,
    pub description: String,
}

/// Curated credibility table, keyed by registrable domain.
#[derive(Debug, Clone, Default)]
pub struct CredibilityTable {
    entries: HashMap<String, TableEntry>,
}

impl CredibilityTable {
    /// Load a tab-separated table: `domain<TAB>level[<TAB>score[<TAB>description]]`.
    /// Lines starting with `#` are comments.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(e).context(format!("opening table {}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let err = |message: String| Error::Table {
                path: origin.to_string(),
                line: line_no,
                message,
            };
            let domain = fields
                .next()
                .filter(|d| !d.trim().is_empty())
                .ok_or_else(|| err("missing domain".to_string()))?;
            let domain = extract_source_domain(domain);
            let level: CredibilityLevel = fields
                .next()
                .ok_or_else(|| err("missing level".to_string()))?
                .trim()
                .parse()
                .map_err(|e| err(format!("{e}")))?;
            let score = match fields.next().map(str::trim) {
                None | Some("") => None,
                Some(raw) => {
                    let value: f64 = raw
                        .parse()
                        .map_err(|_| err(format!("score `{raw}` is not a number")))?;
                    if !(value > 0.0 && value < 1.0) {
                        return Err(err(format!("score {value} outside (0, 1)")));
                    }
                    Some(value)
                }
            };
            let description = fields.next().unwrap_or("").trim().to_string();
            if entries
                .insert(domain.clone(), TableEntry { level, score, description })
                .is_some()
            {
                return Err(err(format!("duplicate domain `{domain}`")));
            }
        }
        Ok(CredibilityTable { entries })
    }

    pub fn get(&self, domain: &str) -> Option<&TableEntry> {
        self.entries.get(&extract_source_domain(domain))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterate entries in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &TableEntry)> {
        self.entries.iter()
    }
}

/// Look a domain up in the curated table; misses come back as Missing.
pub fn lookup_curated(domain: &str, table: &CredibilityTable) -> SourceBackground {
    let normalized = extract_source_domain(domain);
    match table.get(&normalized) {
        Some(entry) => SourceBackground {
            source_domain: normalized,
            description: entry.description.clone(),
            level: Some(entry.level),
            score: Some(entry.score.unwrap_or_else(|| level_to_score(entry.level))),
            provenance: Provenance::Curated,
        },
        None => SourceBackground::missing(normalized),
    }
}

/// Raw material for generating a background: article titles, an encyclopedia
/// summary and answers to the research queries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    #[serde(default)]
    pub article_titles: Vec<String>,
    #[serde(default)]
    pub encyclopedia_summary: String,
    #[serde(default)]
    pub query_answers: Vec<String>,
}

impl SeedInfo {
    pub fn is_empty(&self) -> bool {
        self.article_titles.iter().all(|t| t.trim().is_empty())
            && self.encyclopedia_summary.trim().is_empty()
            && self.query_answers.iter().all(|a| a.trim().is_empty())
    }
}

/// Fetches seed material for a domain. Live implementations may call a search
/// API; tests and offline runs use canned fixtures.
pub trait SearchClient: Send + Sync {
    fn gather(&self, domain: &str, queries: &[String]) -> Result<SeedInfo>;
}

/// Search client returning pre-recorded seeds per domain.
#[derive(Debug, Default)]
pub struct FixtureSearchClient {
    seeds: HashMap<String, SeedInfo>,
}

impl FixtureSearchClient {
    pub fn new(seeds: HashMap<String, SeedInfo>) -> Self {
        FixtureSearchClient { seeds }
    }

    /// Load `{domain: SeedInfo}` from a JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(FixtureSearchClient {
            seeds: serde_json::from_str(&text)?,
        })
    }
}

impl SearchClient for FixtureSearchClient {
    fn gather(&self, domain: &str, _queries: &[String]) -> Result<SeedInfo> {
        Ok(self.seeds.get(domain).cloned().unwrap_or_default())
    }
}

/// Search client with no data; every gather comes back empty.
#[derive(Debug, Default)]
pub struct NullSearchClient;

impl SearchClient for NullSearchClient {
    fn gather(&self, _domain: &str, _queries: &[String]) -> Result<SeedInfo> {
        Ok(SeedInfo::default())
    }
}

/// The built-in research query templates ({domain} placeholder, one per line).
pub fn default_queries() -> Vec<String> {
    parse_queries(DEFAULT_QUERIES)
}

/// Load query templates from a plain-text file, one per line.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(parse_queries(&fs::read_to_string(path)?))
}

fn parse_queries(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

const SECTION_HEADINGS: [&str; 4] = ["history", "ownership", "bias", "failed fact check"];
const SECTION_ALIASES: [&str; 4] = ["history", "funded by", "analysis", "failed fact check"];

fn has_any_section(text: &str) -> bool {
    let lower = text.to_ascii_lowercase();
    SECTION_HEADINGS
        .iter()
        .chain(SECTION_ALIASES.iter())
        .any(|heading| lower.contains(heading))
}

/// Generate a structured background description for a domain from seeds.
pub fn generate_background(
    domain: &str,
    seeds: &SeedInfo,
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
) -> Result<SourceBackground> {
    if seeds.is_empty() {
        return Err(Error::Precondition(format!(
            "no seed material for domain `{domain}`"
        )));
    }
    let bullets = |items: &[String]| -> String {
        let kept: Vec<String> = items
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| format!("- {}", s.trim()))
            .collect();
        if kept.is_empty() {
            "(none)".to_string()
        } else {
            kept.join("\n")
        }
    };
    let summary = if seeds.encyclopedia_summary.trim().is_empty() {
        "(none)".to_string()
    } else {
        seeds.encyclopedia_summary.trim().to_string()
    };
    let user = render(
        GENERATION_TEMPLATE,
        &[
            ("domain", domain),
            ("article_titles", &bullets(&seeds.article_titles)),
            ("encyclopedia_summary", &summary),
            ("query_answers", &bullets(&seeds.query_answers)),
        ],
    );
    let request = ChatRequest {
        model_name: opts.model.clone(),
        messages: vec![ChatMessage {
            role: Role::User,
            content: user,
        }],
        temperature: 0.0,
        max_output_tokens: opts.max_output_tokens,
    };
    let response = backend.complete(&request)?;
    let description = response.text.trim().to_string();
    if !has_any_section(&description) {
        return Err(Error::Format(format!(
            "generated background for `{domain}` has none of the expected sections"
        )));
    }
    Ok(SourceBackground {
        source_domain: extract_source_domain(domain),
        description,
        level: None,
        score: None,
        provenance: Provenance::Generated,
    })
}

/// One worked example shown to the level classifier.
#[derive(Debug, Clone, Deserialize)]
pub struct LevelExemplar {
    pub description: String,
    #[serde(default)]
    pub wikipedia: String,
    pub level: CredibilityLevel,
}

/// Built-in exemplars, one per level.
pub fn default_exemplars() -> Vec<LevelExemplar> {
    serde_json::from_str(DEFAULT_EXEMPLARS).expect("bundled exemplars parse")
}

/// Classify a background description into a credibility level.
pub fn classify_level(
    background: &SourceBackground,
    exemplars: &[LevelExemplar],
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
) -> Result<CredibilityLevel> {
    if background.description.is_empty() {
        return Err(Error::Precondition(
            "background description is empty".to_string(),
        ));
    }
    let mut examples = String::new();
    for (i, exemplar) in exemplars.iter().enumerate() {
        examples.push_str(&format!(
            "Example {}\nMedia Description: {}\nWikipedia: {}\nCredibility: {}\n\n",
            i + 1,
            exemplar.description,
            exemplar.wikipedia,
            exemplar.level
        ));
    }
    let user = render(
        CLASSIFY_LEVEL_TEMPLATE,
        &[
            ("examples", examples.as_str()),
            ("description", background.description.as_str()),
            ("wikipedia", ""),
        ],
    );
    let request = ChatRequest {
        model_name: opts.model.clone(),
        messages: vec![ChatMessage {
            role: Role::User,
            content: user,
        }],
        temperature: 0.0,
        max_output_tokens: opts.max_output_tokens,
    };
    let response = backend.complete(&request)?;
    let label = response
        .text
        .trim()
        .trim_matches(|c: char| !c.is_ascii_alphabetic())
        .to_ascii_lowercase();
    label.parse()
}

/// Supplies one background per domain, memoizing as it goes.
pub trait BackgroundProvider: Send + Sync {
    fn background(&self, domain: &str) -> SourceBackground;
}

/// Curated-only provider: table hit or Missing.
pub struct GtProvider {
    table: CredibilityTable,
}

impl GtProvider {
    pub fn new(table: CredibilityTable) -> Self {
        GtProvider { table }
    }
}

impl BackgroundProvider for GtProvider {
    fn background(&self, domain: &str) -> SourceBackground {
        lookup_curated(domain, &self.table)
    }
}

/// Curated table first; uncurated domains get a generated background with a
/// classified level and mapped score. Generation failures degrade to Missing.
pub struct HybridProvider {
    table: CredibilityTable,
    backend: Arc<dyn ChatBackend>,
    search: Box<dyn SearchClient>,
    queries: Vec<String>,
    exemplars: Vec<LevelExemplar>,
    opts: ChatOptions,
    cache: Mutex<HashMap<String, SourceBackground>>,
}

impl HybridProvider {
    pub fn new(
        table: CredibilityTable,
        backend: Arc<dyn ChatBackend>,
        search: Box<dyn SearchClient>,
        opts: ChatOptions,
    ) -> Self {
        HybridProvider {
            table,
            backend,
            search,
            queries: default_queries(),
            exemplars: default_exemplars(),
            opts,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_queries(mut self, queries: Vec<String>) -> Self {
        self.queries = queries;
        self
    }

    pub fn with_exemplars(mut self, exemplars: Vec<LevelExemplar>) -> Self {
        self.exemplars = exemplars;
        self
    }

    fn generate(&self, domain: &str) -> Result<SourceBackground> {
        let seeds = self.search.gather(domain, &self.queries)?;
        let mut background = generate_background(domain, &seeds, self.backend.as_ref(), &self.opts)?;
        let level = classify_level(&background, &self.exemplars, self.backend.as_ref(), &self.opts)?;
        background.level = Some(level);
        background.score = Some(level_to_score(level));
        Ok(background)
    }
}

impl BackgroundProvider for HybridProvider {
    fn background(&self, domain: &str) -> SourceBackground {
        let normalized = extract_source_domain(domain);
        if let Some(hit) = self.cache.lock().unwrap().get(&normalized) {
            return hit.clone();
        }
        let curated = lookup_curated(&normalized, &self.table);
        let result = if curated.provenance == Provenance::Curated {
            curated
        } else {
            match self.generate(&normalized) {
                Ok(generated) => generated,
                Err(e) => {
                    log::warn!("background generation for `{normalized}` degraded to missing: {e}");
                    SourceBackground::missing(normalized.clone())
                }
            }
        };
        self.cache
            .lock()
            .unwrap()
            .insert(normalized, result.clone());
        result
    }
}

/// Agreement rate of the level classifier against curated labels.
///
/// Runs [`classify_level`] on up to `sample` curated entries that carry a
/// description and reports the fraction matching the curated level.
pub fn benchmark_level_classifier(
    table: &CredibilityTable,
    backend: &dyn ChatBackend,
    opts: &ChatOptions,
    sample: usize,
) -> Result<f64> {
    let exemplars = default_exemplars();
    let mut entries: Vec<(&String, &TableEntry)> = table
        .iter()
        .filter(|(_, e)| !e.description.is_empty())
        .collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    entries.truncate(sample);
    if entries.is_empty() {
        return Err(Error::Precondition(
            "table has no described entries to benchmark".to_string(),
        ));
    }
    let mut hits = 0usize;
    for (domain, entry) in &entries {
        let background = SourceBackground {
            source_domain: (*domain).clone(),
            description: entry.description.clone(),
            level: None,
            score: None,
            provenance: Provenance::Curated,
        };
        if classify_level(&background, &exemplars, backend, opts)? == entry.level {
            hits += 1;
        }
    }
    Ok(hits as f64 / entries.len() as f64)
}
