//! Parallel execution of a schedule into a [`ResultStore`].
//!
//! Workers pull task indices from a shared counter and send outcomes back
//! over a channel. The calling thread is the only writer: it holds outcomes
//! in a reorder buffer and commits them in schedule order, so the store is
//! the same whatever the parallelism.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use serde::Serialize;

use super::store::{ErrorEntry, ResultStore};
use super::{score_task, Clock, ComparisonRecord, ModelBackend};
use crate::error::{BackendError, Error, Result};
use crate::protocol::ComparisonTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each further one.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub clock: Clock,
    /// Process at most this many pending tasks, then stop (resumable).
    pub stop_after: Option<usize>,
    /// Set from outside to stop handing out new tasks.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            parallelism: 1,
            retry: RetryPolicy::default(),
            clock: Clock::System,
            stop_after: None,
            cancel: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Pending tasks left untouched because of a stop, cancel or abort.
    pub remaining: usize,
    /// Set when a capability error stopped the run.
    pub aborted: Option<String>,
}

impl RunSummary {
    pub fn is_clean(&self) -> bool {
        self.failed == 0 && self.remaining == 0 && self.aborted.is_none()
    }
}

fn kind(e: &BackendError) -> &'static str {
    match e {
        BackendError::Transport(_) => "transport",
        BackendError::Capability(_) => "capability",
        BackendError::Task(_) => "task",
        BackendError::Numeric(_) => "numeric",
    }
}

type Outcome = std::result::Result<ComparisonRecord, (BackendError, u32)>;

fn attempt(task: &ComparisonTask, backend: &dyn ModelBackend, opts: &BatchOptions, halt: &AtomicBool) -> Outcome {
    let mut tries = 0;
    loop {
        tries += 1;
        match score_task(task, backend, &opts.clock) {
            Ok(scored) => return Ok(scored.record),
            Err(e) if e.is_retryable() && tries <= opts.retry.max_retries && !halt.load(Ordering::Relaxed) => {
                let delay = opts.retry.base_delay * 2u32.pow(tries - 1);
                log::warn!("task {}: {e}; retrying in {delay:?}", task.task_key);
                thread::sleep(delay);
            }
            Err(e) => return Err((e, tries)),
        }
    }
}

/// Scores every task without a record in `store`.
///
/// Tasks already in the store are skipped. Task-level failures are logged to
/// the store's error file and the run continues; a capability error stops
/// the run after committing whatever finished. A store I/O failure returns
/// `Err`, leaving a store that can be resumed.
pub fn run_batch(
    tasks: &[ComparisonTask],
    backend: &dyn ModelBackend,
    store: &mut ResultStore,
    opts: &BatchOptions,
) -> Result<RunSummary> {
    if opts.parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    let mut summary = RunSummary::default();
    let mut seen = HashSet::new();
    let mut pending = Vec::new();
    for task in tasks {
        if !seen.insert(task.task_key.as_str()) {
            return Err(Error::Validation(format!("task {} is scheduled twice", task.task_key)));
        }
        if store.contains(&task.task_key) {
            summary.skipped += 1;
        } else {
            pending.push(task);
        }
    }
    let limit = opts.stop_after.map_or(pending.len(), |n| n.min(pending.len()));
    log::info!(
        "{} tasks: {} already stored, {} to run",
        tasks.len(),
        summary.skipped,
        limit
    );

    let next = AtomicUsize::new(0);
    let halt = AtomicBool::new(false);
    let cancelled = || opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed));
    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
    let mut committed = 0usize;
    let mut io_error = None;

    thread::scope(|scope| {
        for _ in 0..opts.parallelism.min(limit.max(1)) {
            let tx = tx.clone();
            let (next, halt, pending) = (&next, &halt, &pending);
            scope.spawn(move || loop {
                if halt.load(Ordering::Relaxed) || cancelled() {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= limit {
                    break;
                }
                let outcome = attempt(pending[i], backend, opts, halt);
                if matches!(&outcome, Err((e, _)) if e.is_fatal()) {
                    halt.store(true, Ordering::Relaxed);
                }
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer = BTreeMap::new();
        for (i, outcome) in rx {
            buffer.insert(i, outcome);
            while let Some(outcome) = buffer.remove(&committed) {
                let task = pending[committed];
                committed += 1;
                if io_error.is_some() {
                    continue;
                }
                let written = match outcome {
                    Ok(record) => store.append(&record).map(|_| summary.completed += 1),
                    Err((e, attempts)) => {
                        summary.failed += 1;
                        log::error!("task {} failed after {attempts} attempt(s): {e}", task.task_key);
                        if e.is_fatal() && summary.aborted.is_none() {
                            summary.aborted = Some(e.to_string());
                        }
                        store.append_error(&ErrorEntry {
                            task_key: task.task_key.clone(),
                            kind: kind(&e).into(),
                            message: e.to_string(),
                            attempts,
                            ts: opts.clock.now(),
                        })
                    }
                };
                if let Err(e) = written {
                    halt.store(true, Ordering::Relaxed);
                    io_error = Some(e);
                }
                if committed.is_multiple_of(500) {
                    log::info!("{committed}/{limit} tasks processed");
                }
            }
        }
    });

    if let Some(e) = io_error {
        return Err(e);
    }
    summary.remaining = pending.len() - committed;
    Ok(summary)
}
