//! End-to-end orchestration: runs, manifests and the RQ1–RQ3 reports.
//!
//! Reports are derived artifacts. Every invocation writes a fresh
//! `reports/<name>-<UTC timestamp>/` directory under the output directory and
//! records the content hash of the store it read, so an unchanged store
//! always yields byte-identical report files.

mod config;
mod rq1;
mod rq2;
mod rq3;
mod run;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::inference::{read_records, ComparisonRecord};
use crate::stats::{bh_fdr, CorrelationResult, Interval, Method};

pub use config::{FdrFamily, Rq1Source, RunConfig, RunParams, StatsParams, TimestampMode};
pub use rq1::{cmd_report_rq1, rq1_analysis, Rq1Report};
pub use rq2::{cmd_report_rq2, rq2_analysis, Rq2Report};
pub use rq3::{cmd_report_rq3, rq3_analysis, Rq3Block, Rq3Report};
pub use run::{cmd_run, RunManifest, RunOutcome, FIXED_TIMESTAMP};

/// Notes line placed under every correlation table.
pub const STAR_NOTE: &str = "*** p<0.001, ** p<0.01, * p<0.05 (FDR corrected)";

/// Significance stars for an FDR-adjusted p-value.
pub fn stars(p_adjusted: f64) -> &'static str {
    if p_adjusted < 0.001 {
        "***"
    } else if p_adjusted < 0.01 {
        "**"
    } else if p_adjusted < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Records of a store together with its content hash.
pub struct LoadedStore {
    pub records: Vec<ComparisonRecord>,
    pub hash: String,
    pub model_id: String,
}

pub fn load_store(path: &Path) -> Result<LoadedStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Report(format!("store {} has no records", path.display())));
    }
    let mut models: Vec<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    if models.len() > 1 {
        return Err(Error::Report(format!(
            "store {} mixes models {models:?}; report each model from its own store",
            path.display()
        )));
    }
    Ok(LoadedStore {
        model_id: models[0].to_string(),
        hash: content_hash(&bytes),
        records,
    })
}

/// Fills `p_adjusted` on every result according to the family rule.
pub(crate) fn adjust(results: &mut [CorrelationResult], family: FdrFamily) -> Result<()> {
    let groups: Vec<Vec<usize>> = match family {
        FdrFamily::Pooled => vec![(0..results.len()).collect()],
        FdrFamily::PerMethod => Method::ALL
            .iter()
            .map(|m| (0..results.len()).filter(|&i| results[i].method == *m).collect())
            .collect(),
    };
    for group in groups {
        let raw: Vec<f64> = group.iter().map(|&i| results[i].p_raw).collect();
        for (&i, adj) in group.iter().zip(bh_fdr(&raw)?) {
            results[i].p_adjusted = Some(adj);
        }
    }
    Ok(())
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `0.510*** [0.334, 0.652]`
pub(crate) fn md_cell(r: Option<&CorrelationResult>) -> String {
    let Some(r) = r else {
        return "n/a".into();
    };
    let star = stars(r.p_adjusted.unwrap_or(1.0));
    let ci = match r.ci {
        Interval::Closed { low, high } => format!("[{low:.3}, {high:.3}]"),
        Interval::Unstable { .. } => "[unstable]".into(),
        Interval::Unavailable => "[n/a]".into(),
    };
    format!("{:.3}{star} {ci}", r.estimate)
}

pub(crate) fn ci_note(boot_iters: usize) -> String {
    format!("Pearson CI: Fisher z; Spearman/Kendall CI: percentile bootstrap ({boot_iters} iterations).")
}

pub(crate) fn warnings_md(out: &mut String, warnings: &[String]) {
    if warnings.is_empty() {
        return;
    }
    out.push_str("\n## Warnings\n\n");
    for w in warnings {
        let _ = writeln!(out, "- {w}");
    }
}

/// Files of one report invocation.
#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub(crate) struct ReportMeta<'a> {
    pub report: &'a str,
    pub store_hash: &'a str,
    pub model_id: &'a str,
    pub n_records: usize,
    pub stats: &'a StatsParams,
    pub warnings: &'a [String],
}

/// Creates `<out>/reports/<name>-<timestamp>[-k]`.
pub(crate) fn report_dir(out: &Path, name: &str) -> Result<PathBuf> {
    let root = out.join("reports");
    fs::create_dir_all(&root).map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for k in 1.. {
        let dir = if k == 1 {
            root.join(format!("{name}-{stamp}"))
        } else {
            root.join(format!("{name}-{stamp}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(format!("creating {}", dir.display()), e)),
        }
    }
    unreachable!()
}

pub(crate) fn write_files(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            Ok(path)
        })
        .collect()
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Report(format!("writing CSV: {e}"))
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Report(format!("writing CSV: {e}")))
}
