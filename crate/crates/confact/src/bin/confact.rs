//! Command-line front end; all logic lives in the library.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use confact::chunking::{chunk_document, Granularity, PassageRecord, DEFAULT_MAX_WORDS};
use confact::corpus::{
    load_dataset, parse_dataset, split_stats, validate_dataset, write_dataset, Split,
};
use confact::credibility::{
    CredibilityTable, FixtureSearchClient, GtProvider, HybridProvider, NullSearchClient,
    SearchClient,
};
use confact::credibility::BackgroundProvider;
use confact::error::Error;
use confact::evaluation::{
    cards_from_jsonl, cards_to_jsonl, render_report, score, CardKey, ProviderKind,
};
use confact::experiment::{
    run_experiment, BackendConfig, BackendKind, CellStatus, CredibilityConfig, ExperimentConfig,
};
use confact::generation::{read_verdicts, Strategy, TiePolicy};
use confact::llm::{BackendSpec, ChatOptions, ENV_MODEL};
use confact::ranking::{fuse_and_rank, MissingBackgroundPolicy, RankingConfig, RankingMode};

#[derive(Parser)]
#[command(name = "confact", version, about = "Credibility-aware retrieval-augmented fact checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset file against its invariants.
    Validate { path: PathBuf },
    /// Print counts for one split of a dataset.
    Stats {
        path: PathBuf,
        #[arg(long)]
        split: Split,
    },
    /// Split a dataset's documents into passages (one JSON record per line).
    Chunk {
        dataset: PathBuf,
        #[arg(long, default_value = "para")]
        granularity: String,
        #[arg(long, default_value_t = DEFAULT_MAX_WORDS)]
        max_words: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank a passage file, emitting all scores for audit.
    Rank {
        passages: PathBuf,
        #[arg(long, default_value = "rel")]
        mode: RankingMode,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long, default_value_t = 0.8)]
        beta: f64,
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
        /// Curated credibility table (needed for sf / cw-soft / cw-hard).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value = "keep")]
        missing_background: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the background a provider yields for a source domain.
    Background {
        domain: String,
        #[arg(long, default_value = "gt")]
        provider: ProviderKind,
        #[arg(long)]
        table: PathBuf,
        /// Backend selector for the hybrid provider.
        #[arg(long)]
        backend: Option<String>,
        /// JSON file of `{domain: seeds}` for the hybrid search client.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Annotate document stances in place and write a sidecar audit file.
    Annotate {
        dataset: PathBuf,
        #[arg(long)]
        backend: String,
        #[arg(long)]
        model: Option<String>,
        /// Sidecar path; defaults to `<dataset>.annotations.jsonl`.
        #[arg(long)]
        annotations_out: Option<PathBuf>,
    },
    /// Print the claim ids whose evidence carries both stances.
    Conflicts { dataset: PathBuf },
    /// Run an experiment grid from a config file or single-cell flags.
    Run(RunArgs),
    /// Score a verdict file against a dataset and render a report.
    Eval {
        verdicts: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label for the report row.
        #[arg(long, default_value = "none")]
        provider: ProviderKind,
        /// Label for the report row.
        #[arg(long, default_value = "rel")]
        mode: RankingMode,
    },
    /// Re-render a report from a cards file.
    Report {
        cards: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Dataset path (flag form); ignored when --config is given.
    dataset: Option<PathBuf>,
    /// Experiment config file; overrides every other flag except --out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "split")]
    splits: Vec<Split>,
    #[arg(long = "strategy")]
    strategies: Vec<Strategy>,
    #[arg(long = "mode")]
    modes: Vec<RankingMode>,
    #[arg(long, default_value = "none")]
    provider: ProviderKind,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 0.3)]
    gamma: f64,
    #[arg(long, default_value = "para")]
    granularity: String,
    #[arg(long, default_value_t = DEFAULT_MAX_WORDS)]
    max_words: usize,
    /// Backend selector: `https://…`, `replay:<path>` or `record:<path>`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 1024)]
    max_output_tokens: u32,
    #[arg(long, default_value = "no")]
    tie: TiePolicy,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
}

fn parse_granularity(raw: &str) -> Result<Granularity, Error> {
    match raw {
        "para" | "paragraph" => Ok(Granularity::Paragraph),
        "sent" | "sentence" => Ok(Granularity::Sentence),
        other => Err(Error::Config(format!("unknown granularity `{other}`"))),
    }
}

fn write_or_print(out: Option<&PathBuf>, contents: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, contents).map_err(Error::from),
        None => {
            print!("{contents}");
            std::io::stdout().flush().map_err(Error::from)
        }
    }
}

fn backend_spec_to_config(
    selector: &str,
    model: String,
    max_output_tokens: u32,
) -> Result<BackendConfig, Error> {
    let spec = BackendSpec::parse(selector)?;
    let (kind, url, path, api_key_env) = match spec {
        BackendSpec::Http(http) => (BackendKind::Http, Some(http.url), None, None),
        BackendSpec::Replay(path) => (BackendKind::Replay, None, Some(path), None),
        BackendSpec::Record { path, inner } => (BackendKind::Record, Some(inner.url), Some(path), None),
    };
    Ok(BackendConfig {
        kind,
        url,
        path,
        api_key_env,
        model,
        max_output_tokens,
        context_window: None,
        max_parallel: None,
    })
}

fn default_model(flag: Option<String>) -> String {
    flag.or_else(|| std::env::var(ENV_MODEL).ok())
        .unwrap_or_else(|| "default".to_string())
}

fn run_command(args: RunArgs) -> Result<bool, Error> {
    let config = match &args.config {
        Some(path) => {
            let mut config = ExperimentConfig::load(path)?;
            if let Some(out) = &args.out {
                config.output_dir = out.clone();
            }
            config
        }
        None => {
            let dataset = args
                .dataset
                .clone()
                .ok_or_else(|| Error::Config("run needs a dataset or --config".to_string()))?;
            let backend = args
                .backend
                .as_deref()
                .ok_or_else(|| Error::Config("run needs --backend or --config".to_string()))?;
            if args.strategies.is_empty() {
                return Err(Error::Config("run needs at least one --strategy".to_string()));
            }
            let splits = if args.splits.is_empty() {
                let records = load_dataset(&dataset)?;
                let mut present: Vec<Split> = Vec::new();
                for record in &records {
                    if !present.contains(&record.split) {
                        present.push(record.split);
                    }
                }
                present.sort();
                present
            } else {
                args.splits.clone()
            };
            let modes = if args.modes.is_empty() {
                vec![RankingMode::RelevanceOnly]
            } else {
                args.modes.clone()
            };
            let config = ExperimentConfig {
                dataset,
                splits,
                strategies: args.strategies.clone(),
                modes,
                provider: args.provider,
                ranking: RankingConfig {
                    top_k: args.top_k,
                    beta: args.beta,
                    gamma: args.gamma,
                    mode: RankingMode::RelevanceOnly,
                    granularity: parse_granularity(&args.granularity)?,
                    missing_background_policy: MissingBackgroundPolicy::Keep,
                },
                max_words: args.max_words,
                backend: backend_spec_to_config(
                    backend,
                    default_model(args.model.clone()),
                    args.max_output_tokens,
                )?,
                credibility: args.table.clone().map(|table| CredibilityConfig {
                    table,
                    queries: None,
                    seeds: None,
                }),
                output_dir: args.out.clone().unwrap_or_else(|| PathBuf::from("confact-out")),
                seed: 0,
                parallelism: args.parallelism,
                tie: args.tie,
            };
            config.validate()?;
            config
        }
    };
    let outcome = run_experiment(&config)?;
    for cell in &outcome.cells {
        let label = cell.directory.display();
        match &cell.status {
            CellStatus::Completed => println!("cell {label}: completed"),
            CellStatus::Skipped => println!("cell {label}: already complete, skipped"),
            CellStatus::Failed(reason) => println!("cell {label}: FAILED ({reason})"),
        }
    }
    println!("report: {}", outcome.report_path.display());
    Ok(outcome.any_failed())
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Validate { path } => {
            let records = parse_dataset(&path)?;
            let report = validate_dataset(&records);
            println!("{report}");
            Ok(!report.is_empty())
        }
        Command::Stats { path, split } => {
            let records = load_dataset(&path)?;
            let stats = split_stats(&records, split);
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(false)
        }
        Command::Chunk {
            dataset,
            granularity,
            max_words,
            out,
        } => {
            let granularity = parse_granularity(&granularity)?;
            if max_words < 1 {
                return Err(Error::Config("max-words must be at least 1".to_string()));
            }
            let records = load_dataset(&dataset)?;
            let mut lines = String::new();
            for record in &records {
                for doc in &record.documents {
                    for passage in chunk_document(doc, granularity, max_words) {
                        let line = PassageRecord {
                            claim_id: record.claim_id.clone(),
                            question: record.question.clone(),
                            passage,
                        };
                        lines.push_str(&serde_json::to_string(&line)?);
                        lines.push('\n');
                    }
                }
            }
            write_or_print(out.as_ref(), &lines)?;
            Ok(false)
        }
        Command::Rank {
            passages,
            mode,
            top_k,
            beta,
            gamma,
            table,
            missing_background,
            out,
        } => {
            let missing = match missing_background.as_str() {
                "keep" => MissingBackgroundPolicy::Keep,
                "drop" => MissingBackgroundPolicy::Drop,
                other => {
                    return Err(Error::Config(format!(
                        "unknown missing-background policy `{other}`"
                    )))
                }
            };
            if mode != RankingMode::RelevanceOnly && table.is_none() {
                return Err(Error::Config(format!(
                    "mode `{mode}` needs --table for credibility scores"
                )));
            }
            let backgrounds = match table {
                Some(path) => {
                    let table = CredibilityTable::load(path)?;
                    Some(table)
                }
                None => None,
            };
            let text = std::fs::read_to_string(&passages)?;
            let mut by_claim: Vec<(String, String, Vec<confact::chunking::Passage>)> = Vec::new();
            for (index, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: PassageRecord =
                    serde_json::from_str(line).map_err(|e| Error::Record {
                        index,
                        message: e.to_string(),
                    })?;
                match by_claim.iter_mut().find(|(id, _, _)| *id == record.claim_id) {
                    Some((_, _, passages)) => passages.push(record.passage),
                    None => by_claim.push((record.claim_id, record.question, vec![record.passage])),
                }
            }
            let config = RankingConfig {
                top_k,
                beta,
                gamma,
                mode,
                granularity: Granularity::Paragraph,
                missing_background_policy: missing,
            };
            let mut lines = String::new();
            for (claim_id, question, claim_passages) in &by_claim {
                let background_map = match &backgrounds {
                    Some(table) => {
                        let provider = GtProvider::new(table.clone());
                        let mut map = std::collections::HashMap::new();
                        for passage in claim_passages {
                            map.entry(passage.source_domain.clone())
                                .or_insert_with(|| provider.background(&passage.source_domain));
                        }
                        map
                    }
                    None => Default::default(),
                };
                let ranked = fuse_and_rank(question, claim_passages, &background_map, &config)?;
                if ranked.is_empty() {
                    eprintln!("claim {claim_id}: no admissible evidence");
                    continue;
                }
                for entry in ranked {
                    let line = serde_json::json!({
                        "claim_id": claim_id,
                        "rank": entry.rank,
                        "passage_id": entry.passage.passage_id,
                        "source_domain": entry.passage.source_domain,
                        "s_rel": entry.s_rel,
                        "s_rel_norm": entry.s_rel_norm,
                        "s_cred": entry.s_cred,
                        "s_fused": entry.s_fused,
                        "text": entry.passage.text,
                    });
                    lines.push_str(&line.to_string());
                    lines.push('\n');
                }
            }
            write_or_print(out.as_ref(), &lines)?;
            Ok(false)
        }
        Command::Background {
            domain,
            provider,
            table,
            backend,
            seeds,
            model,
        } => {
            let table = CredibilityTable::load(&table)?;
            let background = match provider {
                ProviderKind::None => {
                    return Err(Error::Config(
                        "background provider must be gt or hybrid".to_string(),
                    ))
                }
                ProviderKind::Gt => GtProvider::new(table).background(&domain),
                ProviderKind::Hybrid => {
                    let selector = backend.ok_or_else(|| {
                        Error::Config("hybrid provider needs --backend".to_string())
                    })?;
                    let chat = Arc::from(BackendSpec::parse(&selector)?.build()?);
                    let search: Box<dyn SearchClient> = match seeds {
                        Some(path) => Box::new(FixtureSearchClient::load(path)?),
                        None => Box::new(NullSearchClient),
                    };
                    let opts = ChatOptions {
                        model: default_model(model),
                        max_output_tokens: 1024,
                    };
                    HybridProvider::new(table, chat, search, opts).background(&domain)
                }
            };
            println!("{}", serde_json::to_string_pretty(&background)?);
            Ok(false)
        }
        Command::Annotate {
            dataset,
            backend,
            model,
            annotations_out,
        } => {
            let chat = BackendSpec::parse(&backend)?.build()?;
            let opts = ChatOptions {
                model: default_model(model),
                max_output_tokens: 1024,
            };
            let mut records = load_dataset(&dataset)?;
            let annotations =
                confact::annotation::annotate_dataset(&mut records, chat.as_ref(), &opts)?;
            write_dataset(&dataset, &records)?;
            let sidecar = annotations_out.unwrap_or_else(|| {
                let mut path = dataset.clone().into_os_string();
                path.push(".annotations.jsonl");
                PathBuf::from(path)
            });
            let mut lines = String::new();
            for annotation in &annotations {
                lines.push_str(&serde_json::to_string(annotation)?);
                lines.push('\n');
            }
            std::fs::write(&sidecar, lines)?;
            println!(
                "annotated {} documents; stances written back to {}, audit in {}",
                annotations.len(),
                dataset.display(),
                sidecar.display()
            );
            Ok(false)
        }
        Command::Conflicts { dataset } => {
            let records = load_dataset(&dataset)?;
            for record in &records {
                if confact::annotation::detect_conflicts(record)? {
                    println!("{}", record.claim_id);
                }
            }
            Ok(false)
        }
        Command::Run(args) => run_command(args),
        Command::Eval {
            verdicts,
            dataset,
            out,
            provider,
            mode,
        } => {
            let verdicts = read_verdicts(&verdicts)?;
            let records = load_dataset(&dataset)?;
            let card = score(&verdicts, &records)?;
            let strategy = verdicts.first().map(|v| v.strategy).unwrap_or(Strategy::DirA);
            let mut splits: Vec<Split> = Vec::new();
            for verdict in &verdicts {
                if let Some(record) = records.iter().find(|r| r.claim_id == verdict.claim_id) {
                    if !splits.contains(&record.split) {
                        splits.push(record.split);
                    }
                }
            }
            let split = if splits.len() == 1 { splits[0] } else { Split::Unassigned };
            let key = CardKey {
                split,
                strategy,
                provider,
                mode,
            };
            let mut cards = BTreeMap::new();
            cards.insert(key, card);
            std::fs::write(&out, render_report(&cards))?;
            let cards_path = out.with_extension("cards.jsonl");
            std::fs::write(&cards_path, cards_to_jsonl(&cards)?)?;
            println!("report: {}", out.display());
            println!("cards: {}", cards_path.display());
            Ok(false)
        }
        Command::Report { cards, out } => {
            let text = std::fs::read_to_string(&cards)?;
            let cards = cards_from_jsonl(&text)?;
            write_or_print(out.as_ref(), &render_report(&cards))?;
            Ok(false)
        }
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Table { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
