//! How stable each firm's confidence is across prompt categories.

use std::fmt::Write as _;
use std::path::Path;

use super::config::{RunConfig, StatsParams};
use super::{csv_error, finish_csv, load_store, report_dir, warnings_md, write_files, ReportMeta, ReportOutput};
use crate::aggregation::{aggregate_firms, firm_dispersion, sector_dispersion, write_dispersion_csv, DispersionResult};
use crate::error::{Error, Result};
use crate::inference::ComparisonRecord;
use crate::universe::{load_universe, Universe};

#[derive(Debug, Clone)]
pub struct Rq2Report {
    pub firms: Vec<DispersionResult>,
    /// Ascending by SD, ties by sector name.
    pub sectors: Vec<DispersionResult>,
    pub warnings: Vec<String>,
}

impl Rq2Report {
    pub fn mean_firm_sd(&self) -> f64 {
        self.firms.iter().map(|d| d.sd).sum::<f64>() / self.firms.len() as f64
    }
}

pub fn rq2_analysis(records: &[ComparisonRecord], universe: &Universe, params: &StatsParams) -> Result<Rq2Report> {
    params.validate()?;
    let options = params.dispersion();
    let mut warnings = Vec::new();
    let mut firms = Vec::new();
    for agg in aggregate_firms(records) {
        if universe.firm(&agg.ticker).is_none() {
            return Err(Error::UnknownTicker(agg.ticker));
        }
        match firm_dispersion(&agg, &options)? {
            Ok(d) => firms.push(d),
            Err(e) => warnings.push(format!("firm {}: dispersion undefined ({e}); omitted", agg.ticker)),
        }
    }
    if firms.is_empty() {
        return Err(Error::Report(
            "dispersion needs at least 2 prompt categories per firm; the store has fewer".into(),
        ));
    }
    let mut sectors = sector_dispersion(&firms, &universe.sector_of(), params.sector_reducer)?;
    sectors.sort_by(|a, b| a.sd.total_cmp(&b.sd).then_with(|| a.key.cmp(&b.key)));
    Ok(Rq2Report {
        firms,
        sectors,
        warnings,
    })
}

impl Rq2Report {
    pub fn dispersion_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        write_dispersion_csv(&self.firms, &self.sectors, &mut out)?;
        Ok(out)
    }

    /// Tidy `sector,model,sd,mad` rows for plotting.
    pub fn heatmap_csv(&self, model_id: &str) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sector", "model", "sd", "mad"]).map_err(csv_error)?;
        for s in &self.sectors {
            w.write_record([s.key.as_str(), model_id, &s.sd.to_string(), &s.mad.to_string()])
                .map_err(csv_error)?;
        }
        finish_csv(w)
    }

    pub fn markdown(&self, model_id: &str, store_hash: &str, params: &StatsParams) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# RQ2: cross-context stability\n");
        let _ = writeln!(md, "- model: `{model_id}`");
        let _ = writeln!(md, "- store: `{store_hash}`");
        let _ = writeln!(
            md,
            "- logit clipping eps {}, sector reducer {}, MAD {}\n",
            params.eps,
            format!("{:?}", params.sector_reducer).to_lowercase(),
            if params.scale_mad { "scaled by 1.4826" } else { "unscaled" }
        );
        md.push_str("| Sector | SD | MAD | Firms |\n|---|---:|---:|---:|\n");
        for s in &self.sectors {
            let _ = writeln!(md, "| {} | {:.3} | {:.3} | {} |", s.key, s.sd, s.mad, s.n_contexts);
        }
        let _ = writeln!(
            md,
            "\nLower values mean stronger anchoring. Mean firm-level SD: {:.3} over {} firms.",
            self.mean_firm_sd(),
            self.firms.len()
        );
        warnings_md(&mut md, &self.warnings);
        md
    }
}

/// Writes `rq2_dispersion.csv`, `rq2_heatmap.csv`, `rq2.md` and `meta.json`.
pub fn cmd_report_rq2(config: &RunConfig, store: &Path) -> Result<ReportOutput> {
    let loaded = load_store(store)?;
    let universe = load_universe(&config.universe)?;
    let report = rq2_analysis(&loaded.records, &universe, &config.stats)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let meta = ReportMeta {
        report: "rq2",
        store_hash: &loaded.hash,
        model_id: &loaded.model_id,
        n_records: loaded.records.len(),
        stats: &config.stats,
        warnings: &report.warnings,
    };
    let dir = report_dir(&config.out, "rq2")?;
    let files = write_files(
        &dir,
        &[
            ("rq2_dispersion.csv", report.dispersion_csv()?),
            ("rq2_heatmap.csv", report.heatmap_csv(&loaded.model_id)?),
            ("rq2.md", report.markdown(&loaded.model_id, &loaded.hash, &config.stats).into_bytes()),
            ("meta.json", serde_json::to_vec_pretty(&meta)?),
        ],
    )?;
    Ok(ReportOutput {
        dir,
        files,
        warnings: report.warnings,
    })
}
