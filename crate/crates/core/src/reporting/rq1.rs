//! Which firm features move the model's confidence, and how much of it
//! sector and industry explain.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::{Rq1Source, RunConfig, StatsParams};
use super::{
    adjust, ci_note, csv_error, finish_csv, fmt_opt, load_store, md_cell, report_dir, stars, warnings_md,
    write_files, ReportMeta, ReportOutput, STAR_NOTE,
};
use crate::aggregation::{aggregate_firms, write_aggregates_csv, FirmAggregate};
use crate::error::{Error, Result};
use crate::hashing::seed_from_parts;
use crate::inference::ComparisonRecord;
use crate::protocol::BASELINE;
use crate::stats::{anova_oneway, correlate, correlation_method_with, AnovaResult, BootstrapSpec, CorrelationResult, Method};
use crate::universe::{load_universe, Profiles, Universe};

#[derive(Debug, Clone)]
pub struct Rq1Report {
    /// `baseline` or `all`.
    pub target: String,
    /// Grouped by feature, features by descending |Pearson r|.
    pub rows: Vec<CorrelationResult>,
    pub anova: Vec<AnovaResult>,
    pub aggregates: Vec<FirmAggregate>,
    pub feature_groups: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl Rq1Report {
    pub fn row(&self, feature: &str, method: Method) -> Option<&CorrelationResult> {
        self.rows.iter().find(|r| r.feature == feature && r.method == method)
    }

    /// Features in report order.
    pub fn features(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.feature.as_str()) {
                out.push(&r.feature);
            }
        }
        out
    }

    fn group(&self, feature: &str) -> &str {
        self.feature_groups.get(feature).map_or("-", String::as_str)
    }
}

/// Correlates `target` with every listed feature under all three methods.
///
/// Undefined results (constant or too-short columns) become warnings.
pub(crate) fn correlate_features<'a>(
    scope: &str,
    features: impl IntoIterator<Item = &'a str>,
    tickers: &[&str],
    target: &[Option<f64>],
    profiles: &Profiles,
    params: &StatsParams,
    warnings: &mut Vec<String>,
) -> Result<Vec<CorrelationResult>> {
    let mut rows = Vec::new();
    for feature in features {
        let x: Vec<Option<f64>> = tickers.iter().map(|t| profiles.get(t, feature)).collect();
        if x.iter().all(Option::is_none) {
            warnings.push(format!("{scope}: feature {feature} has no values for these firms; omitted"));
            continue;
        }
        for method in Method::ALL {
            let boot = BootstrapSpec {
                iters: params.bootstrap_iters,
                seed: seed_from_parts(&[scope, feature, method.name(), &params.bootstrap_seed.to_string()]),
            };
            match correlate(correlation_method_with(method, params.spearman_exact), &x, target, &boot) {
                Ok(r) => rows.push(r.labeled(feature, scope)),
                Err(e) if e.is_undefined_marker() => {
                    warnings.push(format!("{scope}: {method} for {feature} is undefined ({e}); omitted"))
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(rows)
}

pub fn rq1_analysis(records: &[ComparisonRecord], universe: &Universe, params: &StatsParams) -> Result<Rq1Report> {
    params.validate()?;
    let has_baseline = records.iter().any(|r| r.category == BASELINE);
    let use_baseline = match params.rq1_source {
        Rq1Source::Auto => has_baseline,
        Rq1Source::Baseline if !has_baseline => {
            return Err(Error::Report("store has no baseline records".into()));
        }
        Rq1Source::Baseline => true,
        Rq1Source::All => false,
    };
    let selected: Vec<ComparisonRecord> = if use_baseline {
        records.iter().filter(|r| r.category == BASELINE).cloned().collect()
    } else {
        records.to_vec()
    };
    if selected.is_empty() {
        return Err(Error::Report("no records to analyse".into()));
    }
    let aggregates = aggregate_firms(&selected);
    for a in &aggregates {
        if universe.firm(&a.ticker).is_none() {
            return Err(Error::UnknownTicker(a.ticker.clone()));
        }
    }
    let target_name = if use_baseline { BASELINE } else { "all" };
    let profiles = Profiles::from_panel(&universe.panel, &params.reducer()?)?;
    let tickers: Vec<&str> = aggregates.iter().map(|a| a.ticker.as_str()).collect();
    let y: Vec<Option<f64>> = aggregates.iter().map(|a| Some(a.overall)).collect();

    let mut warnings = Vec::new();
    let mut rows = correlate_features(
        target_name,
        profiles.features().iter().map(String::as_str),
        &tickers,
        &y,
        &profiles,
        params,
        &mut warnings,
    )?;
    adjust(&mut rows, params.fdr_family)?;

    let pearson_abs = |feature: &str| {
        rows.iter()
            .find(|r| r.feature == feature && r.method == Method::Pearson)
            .map(|r| r.estimate.abs())
    };
    let mut order: Vec<(String, Option<f64>)> = Vec::new();
    for r in &rows {
        if !order.iter().any(|(f, _)| *f == r.feature) {
            order.push((r.feature.clone(), pearson_abs(&r.feature)));
        }
    }
    order.sort_by(|(fa, a), (fb, b)| match (a, b) {
        (Some(a), Some(b)) => b.total_cmp(a).then_with(|| fa.cmp(fb)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => fa.cmp(fb),
    });
    let rank: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, (f, _))| (f.as_str(), i)).collect();
    let method_rank = |m: Method| Method::ALL.iter().position(|x| *x == m).unwrap_or(0);
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| (rank[r.feature.as_str()], method_rank(r.method)));

    let mut anova = Vec::new();
    for factor in ["sector", "industry"] {
        let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for a in &aggregates {
            let firm = universe.firm(&a.ticker).expect("checked above");
            let label = if factor == "sector" { &firm.sector } else { &firm.industry };
            groups.entry(label).or_default().push(a.overall);
        }
        let groups: Vec<Vec<f64>> = groups.into_values().collect();
        match anova_oneway(&groups) {
            Ok(mut result) => {
                result.factor = factor.into();
                anova.push(result);
            }
            Err(e) => warnings.push(format!("ANOVA by {factor} omitted: {e}")),
        }
    }

    Ok(Rq1Report {
        target: target_name.into(),
        rows: sorted,
        anova,
        aggregates,
        feature_groups: universe.taxonomy.groups.clone(),
        warnings,
    })
}

pub(crate) fn correlation_csv(rows: &[CorrelationResult], category: impl Fn(&CorrelationResult) -> String) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "category", "method", "estimate", "ci_low", "ci_high", "p_raw", "p_adj", "stars"])
        .map_err(csv_error)?;
    for r in rows {
        let p_adj = r.p_adjusted.unwrap_or(1.0);
        w.write_record([
            r.feature.clone(),
            category(r),
            r.method.name().to_string(),
            r.estimate.to_string(),
            fmt_opt(r.ci_low()),
            fmt_opt(r.ci_high()),
            r.p_raw.to_string(),
            p_adj.to_string(),
            stars(p_adj).to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

impl Rq1Report {
    pub fn csv(&self) -> Result<Vec<u8>> {
        correlation_csv(&self.rows, |r| self.group(&r.feature).to_string())
    }

    pub fn anova_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["factor", "f_stat", "p_value", "eta_squared", "df_between", "df_within"])
            .map_err(csv_error)?;
        for a in &self.anova {
            w.write_record([
                a.factor.clone(),
                a.f_stat.to_string(),
                a.p_value.to_string(),
                a.eta_squared.to_string(),
                a.df_between.to_string(),
                a.df_within.to_string(),
            ])
            .map_err(csv_error)?;
        }
        finish_csv(w)
    }

    pub fn markdown(&self, model_id: &str, store_hash: &str, params: &StatsParams) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# RQ1: determinants of model confidence\n");
        let _ = writeln!(md, "- model: `{model_id}`");
        let _ = writeln!(md, "- store: `{store_hash}`");
        let _ = writeln!(
            md,
            "- target: mean confidence over `{}` records, {} firms\n",
            self.target,
            self.aggregates.len()
        );
        md.push_str("| Feature | Category | Pearson r [95% CI] | Spearman ρ [95% CI] | Kendall τ [95% CI] |\n");
        md.push_str("|---|---|---:|---:|---:|\n");
        for feature in self.features() {
            let _ = writeln!(
                md,
                "| {feature} | {} | {} | {} | {} |",
                self.group(feature),
                md_cell(self.row(feature, Method::Pearson)),
                md_cell(self.row(feature, Method::Spearman)),
                md_cell(self.row(feature, Method::Kendall)),
            );
        }
        let _ = writeln!(md, "\n{STAR_NOTE}. {}\n", ci_note(params.bootstrap_iters));

        md.push_str("## Sector and industry effects (one-way ANOVA)\n\n");
        md.push_str("| Factor | F-statistic | p-value | η² | df |\n|---|---:|---:|---:|---:|\n");
        for a in &self.anova {
            let f = if a.f_stat.is_infinite() { "inf".to_string() } else { format!("{:.3}", a.f_stat) };
            let _ = writeln!(
                md,
                "| {} | {f} | {} | {:.3} | ({}, {}) |",
                a.factor,
                fmt_p(a.p_value),
                a.eta_squared,
                a.df_between,
                a.df_within
            );
        }
        warnings_md(&mut md, &self.warnings);
        md
    }
}

/// Writes `rq1.csv`, `rq1_anova.csv`, `rq1.md`, `aggregates.csv` and
/// `meta.json` into a new report directory.
pub fn cmd_report_rq1(config: &RunConfig, store: &Path) -> Result<ReportOutput> {
    let loaded = load_store(store)?;
    let universe = load_universe(&config.universe)?;
    let report = rq1_analysis(&loaded.records, &universe, &config.stats)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut aggregates = Vec::new();
    write_aggregates_csv(&report.aggregates, &mut aggregates)?;
    let meta = ReportMeta {
        report: "rq1",
        store_hash: &loaded.hash,
        model_id: &loaded.model_id,
        n_records: loaded.records.len(),
        stats: &config.stats,
        warnings: &report.warnings,
    };
    let dir = report_dir(&config.out, "rq1")?;
    let files = write_files(
        &dir,
        &[
            ("rq1.csv", report.csv()?),
            ("rq1_anova.csv", report.anova_csv()?),
            ("rq1.md", report.markdown(&loaded.model_id, &loaded.hash, &config.stats).into_bytes()),
            ("aggregates.csv", aggregates),
            ("meta.json", serde_json::to_vec_pretty(&meta)?),
        ],
    )?;
    Ok(ReportOutput {
        dir,
        files,
        warnings: report.warnings,
    })
}
