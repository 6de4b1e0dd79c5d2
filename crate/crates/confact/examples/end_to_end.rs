//! Run the full pipeline (chunk -> rank -> generate -> score -> report) on
//! the bundled two-claim fixture against the bundled replay store.
//!
//! Run: `cargo run -p confact --example end_to_end`

use std::path::Path;

use confact::experiment::{run_experiment, CellStatus, ExperimentConfig};
use confact::generation::read_verdicts;

fn main() -> confact::Result<()> {
    let config_path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/experiment_fixture.toml");
    let mut config = ExperimentConfig::load(&config_path)?;
    let out = tempfile::tempdir().expect("tempdir");
    config.output_dir = out.path().join("out");

    println!(
        "grid: {} split(s) x {} strateg(ies) x {} mode(s), provider {}",
        config.splits.len(),
        config.strategies.len(),
        config.modes.len(),
        config.provider
    );

    let outcome = run_experiment(&config)?;
    for cell in &outcome.cells {
        let status = match &cell.status {
            CellStatus::Completed => "completed".to_string(),
            CellStatus::Skipped => "skipped".to_string(),
            CellStatus::Failed(reason) => format!("FAILED: {reason}"),
        };
        println!("cell {}: {status}", cell.directory.file_name().unwrap().to_string_lossy());
        if matches!(cell.status, CellStatus::Completed) {
            for verdict in read_verdicts(cell.directory.join("verdicts.jsonl"))? {
                println!("  {} -> {:?}", verdict.claim_id, verdict.answer);
            }
        }
    }

    println!("\n{}", std::fs::read_to_string(&outcome.report_path)?);
    println!("(artifacts under {})", config.output_dir.display());
    Ok(())
}
