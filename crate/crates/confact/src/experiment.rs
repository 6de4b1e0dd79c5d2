//! Config-driven experiment runner.
//!
//! One declarative TOML file describes a grid of (split, strategy, mode)
//! cells over a dataset. Each cell ranks, generates and scores; completed
//! cells are detected by their output files and skipped on rerun. A failing
//! cell is logged and the rest of the grid continues.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::chunking::{chunk_document, Granularity, DEFAULT_MAX_WORDS};
use crate::corpus::{load_dataset, ClaimRecord, Split};
use crate::credibility::{
    BackgroundProvider, CredibilityTable, FixtureSearchClient, GtProvider, HybridProvider,
    NullSearchClient, SearchClient, SourceBackground,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    cards_to_jsonl, render_report, score, CardKey, ProviderKind, ScoreCard,
};
use crate::generation::{
    run_strategy, GenerationOptions, ParsedAnswer, Strategy, TiePolicy, Verdict,
};
use crate::llm::{
    ChatBackend, ChatOptions, HttpBackend, HttpConfig, RecordBackend, ReplayBackend, ENV_API_KEY,
};
use crate::ranking::{fuse_and_rank, RankingConfig, RankingMode};

/// How the experiment reaches its LLM.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendKind {
    Http,
    Replay,
    Record,
}

/// Backend section of an experiment config.
#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub url: Option<String>,
    pub path: Option<PathBuf>,
    pub api_key_env: Option<String>,
    pub model: String,
    pub max_output_tokens: u32,
    pub context_window: Option<usize>,
    pub max_parallel: Option<usize>,
}

impl BackendConfig {
    pub fn chat_options(&self) -> ChatOptions {
        ChatOptions {
            model: self.model.clone(),
            max_output_tokens: self.max_output_tokens,
        }
    }

    fn http_config(&self) -> Result<HttpConfig> {
        let url = self
            .url
            .clone()
            .ok_or_else(|| Error::Config("backend kind requires a url".to_string()))?;
        let api_key = self
            .api_key_env
            .as_deref()
            .or(Some(ENV_API_KEY))
            .and_then(|var| std::env::var(var).ok());
        Ok(HttpConfig {
            url,
            api_key,
            context_window: self.context_window,
            max_parallel: self.max_parallel,
        })
    }

    pub fn build(&self) -> Result<Arc<dyn ChatBackend>> {
        match self.kind {
            BackendKind::Http => Ok(Arc::new(HttpBackend::new(&self.http_config()?)?)),
            BackendKind::Replay => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("replay backend requires a path".to_string()))?;
                Ok(Arc::new(ReplayBackend::open(path)?))
            }
            BackendKind::Record => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("record backend requires a path".to_string()))?;
                let inner = HttpBackend::new(&self.http_config()?)?;
                Ok(Arc::new(RecordBackend::create(path, Box::new(inner))?))
            }
        }
    }
}

/// Credibility section: curated table plus optional hybrid inputs.
#[derive(Debug, Clone)]
pub struct CredibilityConfig {
    pub table: PathBuf,
    pub queries: Option<PathBuf>,
    /// JSON file of `{domain: SeedInfo}` used as the hybrid search client.
    pub seeds: Option<PathBuf>,
}

/// A full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub splits: Vec<Split>,
    pub strategies: Vec<Strategy>,
    pub modes: Vec<RankingMode>,
    pub provider: ProviderKind,
    pub ranking: RankingConfig,
    pub max_words: usize,
    pub backend: BackendConfig,
    pub credibility: Option<CredibilityConfig>,
    pub output_dir: PathBuf,
    /// Seeds randomized test corpora only; the pipeline itself is deterministic.
    pub seed: u64,
    pub parallelism: usize,
    pub tie: TiePolicy,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: String,
    splits: Vec<String>,
    strategies: Vec<String>,
    #[serde(default)]
    modes: Option<Vec<String>>,
    provider: String,
    output_dir: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    parallelism: Option<usize>,
    #[serde(default)]
    tie: Option<String>,
    #[serde(default)]
    ranking: RawRanking,
    backend: RawBackend,
    #[serde(default)]
    credibility: Option<RawCredibility>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRanking {
    top_k: Option<usize>,
    beta: Option<f64>,
    gamma: Option<f64>,
    mode: Option<String>,
    granularity: Option<String>,
    max_words: Option<usize>,
    missing_background_policy: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackend {
    kind: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    api_key_env: Option<String>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    max_output_tokens: Option<u32>,
    #[serde(default)]
    context_window: Option<usize>,
    #[serde(default)]
    max_parallel: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCredibility {
    table: String,
    #[serde(default)]
    queries: Option<String>,
    #[serde(default)]
    seeds: Option<String>,
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let path = PathBuf::from(raw);
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

impl ExperimentConfig {
    /// Parse a TOML config file. Relative paths resolve against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("opening config {}: {e}", path.display())))?;
        let raw: RawConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_raw(raw, &base)
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<Self> {
        let splits = raw
            .splits
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Split>>>()?;
        let strategies = raw
            .strategies
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Strategy>>>()?;
        let base_mode: RankingMode = match &raw.ranking.mode {
            Some(mode) => mode.parse()?,
            None => RankingMode::RelevanceOnly,
        };
        let modes = match &raw.modes {
            Some(modes) if !modes.is_empty() => modes
                .iter()
                .map(|m| m.parse())
                .collect::<Result<Vec<RankingMode>>>()?,
            _ => vec![base_mode],
        };
        let granularity = match raw.ranking.granularity.as_deref() {
            None | Some("para") | Some("paragraph") => Granularity::Paragraph,
            Some("sent") | Some("sentence") => Granularity::Sentence,
            Some(other) => {
                return Err(Error::Config(format!("unknown granularity `{other}`")))
            }
        };
        let missing = match raw.ranking.missing_background_policy.as_deref() {
            None | Some("keep") => Default::default(),
            Some("drop") => crate::ranking::MissingBackgroundPolicy::Drop,
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown missing_background_policy `{other}`"
                )))
            }
        };
        let ranking = RankingConfig {
            top_k: raw.ranking.top_k.unwrap_or(5),
            beta: raw.ranking.beta.unwrap_or(0.8),
            gamma: raw.ranking.gamma.unwrap_or(0.3),
            mode: base_mode,
            granularity,
            missing_background_policy: missing,
        };
        let backend_kind = match raw.backend.kind.as_str() {
            "http" | "url" => BackendKind::Http,
            "replay" => BackendKind::Replay,
            "record" => BackendKind::Record,
            other => return Err(Error::Config(format!("unknown backend kind `{other}`"))),
        };
        let config = ExperimentConfig {
            dataset: resolve(base, &raw.dataset),
            splits,
            strategies,
            modes,
            provider: raw.provider.parse()?,
            ranking,
            max_words: raw.ranking.max_words.unwrap_or(DEFAULT_MAX_WORDS),
            backend: BackendConfig {
                kind: backend_kind,
                url: raw.backend.url,
                path: raw.backend.path.as_deref().map(|p| resolve(base, p)),
                api_key_env: raw.backend.api_key_env,
                model: raw.backend.model.unwrap_or_else(|| "default".to_string()),
                max_output_tokens: raw.backend.max_output_tokens.unwrap_or(1024),
                context_window: raw.backend.context_window,
                max_parallel: raw.backend.max_parallel,
            },
            credibility: raw.credibility.map(|c| CredibilityConfig {
                table: resolve(base, &c.table),
                queries: c.queries.as_deref().map(|p| resolve(base, p)),
                seeds: c.seeds.as_deref().map(|p| resolve(base, p)),
            }),
            output_dir: resolve(base, &raw.output_dir),
            seed: raw.seed.unwrap_or(0),
            parallelism: raw.parallelism.unwrap_or(crate::llm::DEFAULT_MAX_PARALLEL),
            tie: match raw.tie.as_deref() {
                Some(tie) => tie.parse()?,
                None => TiePolicy::default(),
            },
        };
        config.validate()?;
        Ok(config)
    }

    /// Check cross-field invariants and input file existence.
    pub fn validate(&self) -> Result<()> {
        if self.splits.is_empty() || self.strategies.is_empty() || self.modes.is_empty() {
            return Err(Error::Config(
                "splits, strategies and modes must be non-empty".to_string(),
            ));
        }
        self.ranking.validate()?;
        if self.max_words < 1 {
            return Err(Error::Config("max_words must be at least 1".to_string()));
        }
        if self.parallelism < 1 {
            return Err(Error::Config("parallelism must be at least 1".to_string()));
        }
        if self.provider == ProviderKind::None {
            if let Some(strategy) = self.strategies.iter().find(|s| s.requires_backgrounds()) {
                return Err(Error::Config(format!(
                    "strategy `{strategy}` needs source backgrounds but provider is `none`"
                )));
            }
            if let Some(mode) = self
                .modes
                .iter()
                .find(|m| **m != RankingMode::RelevanceOnly)
            {
                return Err(Error::Config(format!(
                    "ranking mode `{mode}` needs source credibility but provider is `none`"
                )));
            }
        }
        if !self.dataset.exists() {
            return Err(Error::Config(format!(
                "dataset {} does not exist",
                self.dataset.display()
            )));
        }
        if self.provider != ProviderKind::None {
            let credibility = self.credibility.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "provider `{}` requires a [credibility] table",
                    self.provider
                ))
            })?;
            if !credibility.table.exists() {
                return Err(Error::Config(format!(
                    "credibility table {} does not exist",
                    credibility.table.display()
                )));
            }
        }
        Ok(())
    }

    /// Check that the configured backend's inputs exist. Only meaningful when
    /// the backend is built from the config rather than supplied directly.
    pub fn validate_backend(&self) -> Result<()> {
        if self.backend.kind == BackendKind::Replay {
            match &self.backend.path {
                Some(path) if path.exists() => {}
                Some(path) => {
                    return Err(Error::Config(format!(
                        "replay store {} does not exist",
                        path.display()
                    )))
                }
                None => return Err(Error::Config("replay backend requires a path".to_string())),
            }
        }
        Ok(())
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Completed,
    /// Outputs already existed; nothing ran.
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub key: CardKey,
    pub directory: PathBuf,
    pub status: CellStatus,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub cells: Vec<CellOutcome>,
    pub report_path: PathBuf,
    pub cards_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn any_failed(&self) -> bool {
        self.cells
            .iter()
            .any(|c| matches!(c.status, CellStatus::Failed(_)))
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cell_dir_name(key: &CardKey) -> String {
    format!("{}_{}_{}", key.split, key.strategy, key.mode)
}

fn build_provider(
    config: &ExperimentConfig,
    backend: Arc<dyn ChatBackend>,
) -> Result<Option<Arc<dyn BackgroundProvider>>> {
    match config.provider {
        ProviderKind::None => Ok(None),
        ProviderKind::Gt => {
            let credibility = config.credibility.as_ref().expect("validated");
            let table = CredibilityTable::load(&credibility.table)?;
            Ok(Some(Arc::new(GtProvider::new(table))))
        }
        ProviderKind::Hybrid => {
            let credibility = config.credibility.as_ref().expect("validated");
            let table = CredibilityTable::load(&credibility.table)?;
            let search: Box<dyn SearchClient> = match &credibility.seeds {
                Some(path) => Box::new(FixtureSearchClient::load(path)?),
                None => Box::new(NullSearchClient),
            };
            let mut provider = HybridProvider::new(
                table,
                backend,
                search,
                config.backend.chat_options(),
            );
            if let Some(path) = &credibility.queries {
                provider = provider.with_queries(crate::credibility::load_queries(path)?);
            }
            Ok(Some(Arc::new(provider)))
        }
    }
}

/// Backgrounds for every source domain among a claim's documents.
fn claim_backgrounds(
    claim: &ClaimRecord,
    provider: Option<&dyn BackgroundProvider>,
) -> HashMap<String, SourceBackground> {
    let Some(provider) = provider else {
        return HashMap::new();
    };
    let mut map = HashMap::new();
    for doc in &claim.documents {
        if !map.contains_key(&doc.source_domain) {
            map.insert(
                doc.source_domain.clone(),
                provider.background(&doc.source_domain),
            );
        }
    }
    map
}

fn process_claim(
    claim: &ClaimRecord,
    strategy: Strategy,
    ranking: &RankingConfig,
    max_words: usize,
    provider: Option<&dyn BackgroundProvider>,
    backend: &dyn ChatBackend,
    opts: &GenerationOptions,
) -> Result<Verdict> {
    let mut passages = Vec::new();
    for doc in &claim.documents {
        passages.extend(chunk_document(doc, ranking.granularity, max_words));
    }
    let backgrounds = claim_backgrounds(claim, provider);
    let ranked = fuse_and_rank(&claim.question, &passages, &backgrounds, ranking)?;
    if ranked.is_empty() {
        log::warn!("claim {}: no admissible evidence", claim.claim_id);
        return Ok(Verdict {
            claim_id: claim.claim_id.clone(),
            strategy,
            answer: ParsedAnswer::Unparseable,
            candidates: Vec::new(),
            raw_responses: Vec::new(),
            token_usage: None,
            note: Some("no admissible evidence".to_string()),
        });
    }
    run_strategy(claim, strategy, &ranked, &backgrounds, backend, opts)
}

fn run_cell(
    records: &[ClaimRecord],
    key: &CardKey,
    config: &ExperimentConfig,
    provider: Option<&dyn BackgroundProvider>,
    backend: &dyn ChatBackend,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<Verdict>, ScoreCard)> {
    let claims: Vec<&ClaimRecord> = records.iter().filter(|r| r.split == key.split).collect();
    if claims.is_empty() {
        return Err(Error::Config(format!(
            "split `{}` selects no claims",
            key.split
        )));
    }
    let ranking = RankingConfig {
        mode: key.mode,
        ..config.ranking.clone()
    };
    let opts = GenerationOptions {
        chat: config.backend.chat_options(),
        tie: config.tie,
    };
    let verdicts: Result<Vec<Verdict>> = pool.install(|| {
        use rayon::prelude::*;
        claims
            .par_iter()
            .map(|claim| {
                process_claim(
                    claim,
                    key.strategy,
                    &ranking,
                    config.max_words,
                    provider,
                    backend,
                    &opts,
                )
            })
            .collect()
    });
    let verdicts = verdicts?;
    let gold: Vec<ClaimRecord> = claims.into_iter().cloned().collect();
    let card = score(&verdicts, &gold)?;
    Ok((verdicts, card))
}

/// Run the full grid with an explicitly supplied backend.
pub fn run_experiment_with_backend(
    config: &ExperimentConfig,
    backend: Arc<dyn ChatBackend>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let records = load_dataset(&config.dataset)?;
    let provider = build_provider(config, Arc::clone(&backend))?;
    fs::create_dir_all(&config.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut cells = Vec::new();
    let mut cards: BTreeMap<CardKey, ScoreCard> = BTreeMap::new();
    for &split in &config.splits {
        for &strategy in &config.strategies {
            for &mode in &config.modes {
                let key = CardKey {
                    split,
                    strategy,
                    provider: config.provider,
                    mode,
                };
                let dir = config.output_dir.join(cell_dir_name(&key));
                let verdicts_path = dir.join("verdicts.jsonl");
                let scorecard_path = dir.join("scorecard.json");
                if verdicts_path.exists() && scorecard_path.exists() {
                    let card: ScoreCard =
                        serde_json::from_str(&fs::read_to_string(&scorecard_path)?)?;
                    cards.insert(key, card);
                    cells.push(CellOutcome {
                        key,
                        directory: dir,
                        status: CellStatus::Skipped,
                    });
                    log::info!("cell {} already complete, skipping", cell_dir_name(&key));
                    continue;
                }
                fs::create_dir_all(&dir)?;
                match run_cell(&records, &key, config, provider.as_deref(), backend.as_ref(), &pool)
                {
                    Ok((verdicts, card)) => {
                        let mut lines = String::new();
                        for verdict in &verdicts {
                            lines.push_str(&serde_json::to_string(verdict)?);
                            lines.push('\n');
                        }
                        write_atomic(&verdicts_path, &lines)?;
                        let mut card_json = serde_json::to_string_pretty(&card)?;
                        card_json.push('\n');
                        write_atomic(&scorecard_path, &card_json)?;
                        cards.insert(key, card);
                        cells.push(CellOutcome {
                            key,
                            directory: dir,
                            status: CellStatus::Completed,
                        });
                    }
                    Err(e) => {
                        log::error!("cell {} failed: {e}", cell_dir_name(&key));
                        cells.push(CellOutcome {
                            key,
                            directory: dir,
                            status: CellStatus::Failed(e.to_string()),
                        });
                    }
                }
            }
        }
    }

    let report_path = config.output_dir.join("report.md");
    let cards_path = config.output_dir.join("cards.jsonl");
    write_atomic(&report_path, &render_report(&cards))?;
    write_atomic(&cards_path, &cards_to_jsonl(&cards)?)?;
    Ok(ExperimentOutcome {
        cells,
        report_path,
        cards_path,
    })
}

/// Run the grid with the backend described by the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate_backend()?;
    let backend = config.backend.build()?;
    run_experiment_with_backend(config, backend)
}
