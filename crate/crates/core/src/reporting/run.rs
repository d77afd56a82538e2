use std::fs;
use std::time::Duration;

use serde::Serialize;

use super::config::{RunConfig, TimestampMode};
use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::inference::{
    run_batch, BackendContext, BackendRegistry, BatchOptions, Clock, ResultStore, RetryPolicy, RunSummary,
};
use crate::protocol::build_schedule;
use crate::universe::load_universe;

/// Record timestamp used when timestamps are fixed.
pub const FIXED_TIMESTAMP: &str = "1970-01-01T00:00:00.000Z";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: RunConfig,
    pub template_hash: String,
    pub firms_hash: String,
    pub panel_hash: String,
    pub backend_id: String,
    pub model_id: String,
    pub scheduled_tasks: usize,
    pub per_firm_tasks: usize,
    pub summary: RunSummary,
    pub store_records: usize,
    pub store_hash: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub manifest: RunManifest,
}

fn hash_file(path: &std::path::Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(content_hash(&bytes))
}

/// Builds the schedule, scores it into `<out>/store.jsonl` and writes
/// `<out>/manifest.json`. `stop_after` caps the number of tasks attempted in
/// this invocation; the store stays resumable.
pub fn cmd_run(config: &RunConfig, registry: &BackendRegistry, stop_after: Option<usize>) -> Result<RunOutcome> {
    config.validate()?;
    let universe = load_universe(&config.universe)?;
    let templates = config.templates()?;
    let tasks = build_schedule(&universe.firms, &templates, &config.schedule)?;
    let reducer = config.stats.reducer()?;
    let backend = registry.create(
        &config.backend,
        &BackendContext {
            universe: &universe,
            reducer: &reducer,
        },
    )?;

    let fixed = match config.run.timestamps {
        TimestampMode::Fixed => true,
        TimestampMode::System => false,
        TimestampMode::Auto => config.backend.kind == "synthetic",
    };
    let options = BatchOptions {
        parallelism: config.run.parallelism,
        retry: RetryPolicy {
            max_retries: config.run.max_retries,
            base_delay: Duration::from_millis(config.run.retry_base_ms),
        },
        clock: if fixed {
            Clock::Fixed(FIXED_TIMESTAMP.into())
        } else {
            Clock::System
        },
        stop_after,
        cancel: None,
    };

    let store_path = config.store_path();
    let mut store = ResultStore::open(&store_path)?;
    let summary = run_batch(&tasks, backend.as_ref(), &mut store, &options)?;
    let store_records = store.len();
    drop(store);

    let manifest = RunManifest {
        tool: format!("biasaudit {}", env!("CARGO_PKG_VERSION")),
        config: config.clone(),
        template_hash: templates.hash().to_string(),
        firms_hash: hash_file(&config.universe.firms)?,
        panel_hash: hash_file(&config.universe.panel)?,
        backend_id: backend.backend_id().to_string(),
        model_id: backend.model_id().to_string(),
        scheduled_tasks: tasks.len(),
        per_firm_tasks: config.schedule.per_firm_tasks(universe.firms.len()),
        summary: summary.clone(),
        store_records,
        store_hash: hash_file(&store_path)?,
    };
    let path = config.manifest_path();
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    log::info!(
        "run finished: completed {}, skipped {}, failed {}, remaining {}",
        summary.completed,
        summary.skipped,
        summary.failed,
        summary.remaining
    );
    Ok(RunOutcome { summary, manifest })
}
