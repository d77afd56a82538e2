//! Firm-level confidence aggregates and cross-category dispersion.
//!
//! Every record contributes to both of its firms: the chosen firm is credited
//! the record's confidence p and the other firm 1 − p. Contributions are
//! sorted before summation so aggregates do not depend on record order.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ComparisonRecord;
use crate::protocol::BASELINE;
use crate::stats::StatsError;

pub const DEFAULT_EPS: f64 = 1e-3;

/// Consistency factor that makes the MAD estimate σ under normality.
pub const MAD_NORMAL_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmAggregate {
    pub ticker: String,
    /// Y_i: mean credited confidence over every comparison of the firm.
    pub overall: f64,
    pub per_category: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
}

impl FirmAggregate {
    pub fn n_records(&self) -> usize {
        self.counts.values().sum()
    }
}

fn sorted_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregates records into one entry per firm, ordered by ticker.
pub fn aggregate_firms(records: &[ComparisonRecord]) -> Vec<FirmAggregate> {
    let mut credits: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in records {
        for (ticker, value) in [(r.chosen.as_str(), r.confidence), (r.other(), 1.0 - r.confidence)] {
            credits
                .entry(ticker)
                .or_default()
                .entry(r.category.as_str())
                .or_default()
                .push(value);
        }
    }
    credits
        .into_iter()
        .map(|(ticker, by_category)| {
            let mut all = Vec::new();
            let mut per_category = BTreeMap::new();
            let mut counts = BTreeMap::new();
            for (category, mut values) in by_category {
                all.extend_from_slice(&values);
                counts.insert(category.to_string(), values.len());
                per_category.insert(category.to_string(), sorted_mean(&mut values));
            }
            FirmAggregate {
                ticker: ticker.to_string(),
                overall: sorted_mean(&mut all),
                per_category,
                counts,
            }
        })
        .collect()
}

/// `ln(q / (1 − q))` with `q = clamp(p, eps, 1 − eps)`.
pub fn clipped_logit(p: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Config(format!("clipping eps must lie in (0, 0.5), got {eps}")));
    }
    if !p.is_finite() {
        return Err(Error::Numeric(format!("confidence {p} is not finite")));
    }
    let q = p.clamp(eps, 1.0 - eps);
    Ok((q / (1.0 - q)).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    /// Ticker for firm rows, sector for rollups.
    pub key: String,
    pub sd: f64,
    pub mad: f64,
    /// Categories for a firm, member firms for a sector.
    pub n_contexts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DispersionOptions {
    pub eps: f64,
    /// Multiply the MAD by [`MAD_NORMAL_SCALE`].
    pub scale_mad: bool,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        DispersionOptions {
            eps: DEFAULT_EPS,
            scale_mad: false,
        }
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_of_sorted(&v)
}

/// Sample SD and unscaled MAD of `values` (at least two).
pub fn sd_and_mad(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if values.iter().all(|&v| v == values[0]) {
        return (0.0, 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let ss: f64 = sorted.iter().map(|v| (v - mean).powi(2)).sum();
    let med = median_of_sorted(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    ((ss / (n - 1) as f64).sqrt(), median_of_sorted(&dev))
}

/// Dispersion of a firm's clipped-logit category confidences.
///
/// The generic `baseline` category is not a context and is left out.
pub fn firm_dispersion(agg: &FirmAggregate, opts: &DispersionOptions) -> Result<std::result::Result<DispersionResult, StatsError>> {
    let logits = agg
        .per_category
        .iter()
        .filter(|(c, _)| c.as_str() != BASELINE)
        .map(|(_, &p)| clipped_logit(p, opts.eps))
        .collect::<Result<Vec<f64>>>()?;
    if logits.len() < 2 {
        return Ok(Err(StatsError::InsufficientData {
            n: logits.len(),
            required: 2,
        }));
    }
    let (sd, mad) = sd_and_mad(&logits);
    Ok(Ok(DispersionResult {
        key: agg.ticker.clone(),
        sd,
        mad: if opts.scale_mad { mad * MAD_NORMAL_SCALE } else { mad },
        n_contexts: logits.len(),
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorReducer {
    #[default]
    Mean,
    Median,
}

impl std::str::FromStr for SectorReducer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(SectorReducer::Mean),
            "median" => Ok(SectorReducer::Median),
            other => Err(Error::Config(format!("sector reducer must be mean or median, got {other:?}"))),
        }
    }
}

/// Rolls firm dispersions up to sectors, ordered by sector name.
///
/// Firms without a sector are an error; sectors without firms do not appear.
pub fn sector_dispersion(
    firm_results: &[DispersionResult],
    sectors: &BTreeMap<String, String>,
    reducer: SectorReducer,
) -> Result<Vec<DispersionResult>> {
    let mut members: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in firm_results {
        let sector = sectors
            .get(&r.key)
            .ok_or_else(|| Error::UnknownTicker(r.key.clone()))?;
        let entry = members.entry(sector).or_default();
        entry.0.push(r.sd);
        entry.1.push(r.mad);
    }
    let reduce = |v: &mut Vec<f64>| match reducer {
        SectorReducer::Mean => sorted_mean(v),
        SectorReducer::Median => median(v),
    };
    Ok(members
        .into_iter()
        .map(|(sector, (mut sds, mut mads))| DispersionResult {
            key: sector.to_string(),
            n_contexts: sds.len(),
            sd: reduce(&mut sds),
            mad: reduce(&mut mads),
        })
        .collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(format!("writing CSV: {e}"))
}

/// `ticker,overall,<categories…>,n_records`; absent categories are empty.
pub fn write_aggregates_csv(aggs: &[FirmAggregate], out: impl Write) -> Result<()> {
    let mut categories: Vec<&str> = aggs
        .iter()
        .flat_map(|a| a.per_category.keys().map(String::as_str))
        .collect();
    categories.sort_unstable();
    categories.dedup();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["ticker", "overall"];
    header.extend(&categories);
    header.push("n_records");
    w.write_record(&header).map_err(csv_err)?;
    for a in aggs {
        let mut row = vec![a.ticker.clone(), a.overall.to_string()];
        row.extend(
            categories
                .iter()
                .map(|c| a.per_category.get(*c).map(f64::to_string).unwrap_or_default()),
        );
        row.push(a.n_records().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}

/// `scope,key,sd,mad,n` with firm rows first, then sector rows.
pub fn write_dispersion_csv(firms: &[DispersionResult], sectors: &[DispersionResult], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "key", "sd", "mad", "n"]).map_err(csv_err)?;
    for (scope, rows) in [("firm", firms), ("sector", sectors)] {
        for r in rows {
            w.write_record([scope, &r.key, &r.sd.to_string(), &r.mad.to_string(), &r.n_contexts.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}
