//! Whether category-specific prompts track the features mapped to that
//! category.

use std::fmt::Write as _;
use std::path::Path;

use super::config::{RunConfig, StatsParams};
use super::rq1::{correlate_features, correlation_csv};
use super::{adjust, ci_note, load_store, md_cell, report_dir, warnings_md, write_files, ReportMeta, ReportOutput, STAR_NOTE};
use crate::aggregation::aggregate_firms;
use crate::error::{Error, Result};
use crate::inference::ComparisonRecord;
use crate::stats::{CorrelationResult, Method};
use crate::universe::{load_universe, Profiles, Universe, MAPPED_CATEGORIES};

#[derive(Debug, Clone)]
pub struct Rq3Block {
    pub category: String,
    pub n_firms: usize,
    /// Features in name order, methods in Pearson, Spearman, Kendall order.
    pub rows: Vec<CorrelationResult>,
}

impl Rq3Block {
    pub fn row(&self, feature: &str, method: Method) -> Option<&CorrelationResult> {
        self.rows.iter().find(|r| r.feature == feature && r.method == method)
    }

    pub fn features(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.rows.iter().map(|r| r.feature.as_str()).collect();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone)]
pub struct Rq3Report {
    /// Fundamental, Growth, Risk, Technical; absent categories are skipped.
    pub blocks: Vec<Rq3Block>,
    pub warnings: Vec<String>,
}

impl Rq3Report {
    pub fn block(&self, category: &str) -> Option<&Rq3Block> {
        self.blocks.iter().find(|b| b.category == category)
    }
}

pub fn rq3_analysis(records: &[ComparisonRecord], universe: &Universe, params: &StatsParams) -> Result<Rq3Report> {
    params.validate()?;
    let aggregates = aggregate_firms(records);
    for a in &aggregates {
        if universe.firm(&a.ticker).is_none() {
            return Err(Error::UnknownTicker(a.ticker.clone()));
        }
    }
    let profiles = Profiles::from_panel(&universe.panel, &params.reducer()?)?;
    let mut warnings = Vec::new();
    let mut blocks = Vec::new();
    for category in MAPPED_CATEGORIES {
        let scored: Vec<(&str, f64)> = aggregates
            .iter()
            .filter_map(|a| a.per_category.get(category).map(|&y| (a.ticker.as_str(), y)))
            .collect();
        if scored.is_empty() {
            warnings.push(format!("category {category} has no records in the store; omitted"));
            continue;
        }
        let tickers: Vec<&str> = scored.iter().map(|(t, _)| *t).collect();
        let y: Vec<Option<f64>> = scored.iter().map(|(_, y)| Some(*y)).collect();
        let mut features: Vec<&str> = universe
            .taxonomy
            .categories
            .get(category)
            .map(|fs| fs.iter().map(String::as_str).collect())
            .unwrap_or_default();
        features.sort_unstable();
        features.dedup();
        let rows = correlate_features(category, features, &tickers, &y, &profiles, params, &mut warnings)?;
        blocks.push(Rq3Block {
            category: category.into(),
            n_firms: tickers.len(),
            rows,
        });
    }
    if blocks.is_empty() {
        return Err(Error::Report(format!(
            "the store has records for none of the mapped categories {MAPPED_CATEGORIES:?}"
        )));
    }

    // one BH family across the whole report (per method unless pooled)
    let mut all: Vec<CorrelationResult> = blocks.iter().flat_map(|b| b.rows.clone()).collect();
    adjust(&mut all, params.fdr_family)?;
    let mut adjusted = all.into_iter();
    for block in &mut blocks {
        for row in &mut block.rows {
            *row = adjusted.next().expect("same length");
        }
    }
    Ok(Rq3Report { blocks, warnings })
}

impl Rq3Report {
    pub fn csv(&self) -> Result<Vec<u8>> {
        let rows: Vec<CorrelationResult> = self.blocks.iter().flat_map(|b| b.rows.clone()).collect();
        // the scope label carried in `target` is the category
        correlation_csv(&rows, |r| r.target.clone())
    }

    pub fn markdown(&self, model_id: &str, store_hash: &str, params: &StatsParams) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# RQ3: alignment with category-mapped features\n");
        let _ = writeln!(md, "- model: `{model_id}`");
        let _ = writeln!(md, "- store: `{store_hash}`\n");
        md.push_str("| Feature | Pearson r [95% CI] | Spearman ρ [95% CI] | Kendall τ [95% CI] |\n");
        md.push_str("|---|---:|---:|---:|\n");
        for block in &self.blocks {
            let _ = writeln!(md, "| ***{}*** ({} firms) | | | |", block.category, block.n_firms);
            for feature in block.features() {
                let _ = writeln!(
                    md,
                    "| {feature} | {} | {} | {} |",
                    md_cell(block.row(feature, Method::Pearson)),
                    md_cell(block.row(feature, Method::Spearman)),
                    md_cell(block.row(feature, Method::Kendall)),
                );
            }
        }
        let _ = writeln!(md, "\n{STAR_NOTE}. {}", ci_note(params.bootstrap_iters));
        warnings_md(&mut md, &self.warnings);
        md
    }
}

/// Writes `rq3.csv`, `rq3.md` and `meta.json`.
pub fn cmd_report_rq3(config: &RunConfig, store: &Path) -> Result<ReportOutput> {
    let loaded = load_store(store)?;
    let universe = load_universe(&config.universe)?;
    let report = rq3_analysis(&loaded.records, &universe, &config.stats)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let meta = ReportMeta {
        report: "rq3",
        store_hash: &loaded.hash,
        model_id: &loaded.model_id,
        n_records: loaded.records.len(),
        stats: &config.stats,
        warnings: &report.warnings,
    };
    let dir = report_dir(&config.out, "rq3")?;
    let files = write_files(
        &dir,
        &[
            ("rq3.csv", report.csv()?),
            ("rq3.md", report.markdown(&loaded.model_id, &loaded.hash, &config.stats).into_bytes()),
            ("meta.json", serde_json::to_vec_pretty(&meta)?),
        ],
    )?;
    Ok(ReportOutput {
        dir,
        files,
        warnings: report.warnings,
    })
}
