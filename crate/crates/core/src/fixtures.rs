//! Generated universes for demos, tests and synthetic audits.
//!
//! Firms get a stable latent level per feature plus small monthly jitter, so
//! a reduced profile is close to the latent level. Every feature the shipped
//! taxonomy mentions is present. Values are drawn as standard normals; for
//! `market_cap` read them as log market capitalization.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::universe::{FeaturePanel, FeatureTaxonomy, FirmRecord, Universe, UniversePaths};

/// (industry, sector), interleaved so any prefix spreads across sectors.
pub const INDUSTRIES: [(&str, &str); 27] = [
    ("Software - Infrastructure", "Technology"),
    ("Banks - Diversified", "Financial Services"),
    ("Drug Manufacturers - General", "Healthcare"),
    ("Oil & Gas Integrated", "Energy"),
    ("Internet Content & Information", "Communication Services"),
    ("Packaged Foods", "Consumer Defensive"),
    ("Aerospace & Defense", "Industrials"),
    ("Restaurants", "Consumer Cyclical"),
    ("Semiconductors", "Technology"),
    ("Capital Markets", "Financial Services"),
    ("Healthcare Plans", "Healthcare"),
    ("Oil & Gas E&P", "Energy"),
    ("Entertainment", "Communication Services"),
    ("Beverages - Non-Alcoholic", "Consumer Defensive"),
    ("Integrated Freight & Logistics", "Industrials"),
    ("Home Improvement Retail", "Consumer Cyclical"),
    ("Banks - Regional", "Financial Services"),
    ("Diagnostics & Research", "Healthcare"),
    ("Oil & Gas Equipment & Services", "Energy"),
    ("Household & Personal Products", "Consumer Defensive"),
    ("Farm & Heavy Construction Machinery", "Industrials"),
    ("Lodging", "Consumer Cyclical"),
    ("Credit Services", "Financial Services"),
    ("Oil & Gas Refining & Marketing", "Energy"),
    ("Discount Stores", "Consumer Defensive"),
    ("Conglomerates", "Industrials"),
    ("Tobacco", "Consumer Defensive"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureSpec {
    pub n_firms: usize,
    pub months: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_firms: 10,
            months: 12,
            seed: 0,
        }
    }
}

/// `0 → "AAA"`, `1 → "AAB"`, …
pub fn fixture_ticker(i: usize) -> String {
    let letter = |k: usize| (b'A' + (k % 26) as u8) as char;
    [letter(i / 676), letter(i / 26), letter(i)].iter().collect()
}

fn month_label(index: usize) -> String {
    format!("{}-{:02}", 2017 + index / 12, index % 12 + 1)
}

pub fn synthetic_universe(spec: &FixtureSpec) -> Result<Universe> {
    if spec.n_firms < 2 || spec.n_firms > 26 * 26 * 26 {
        return Err(Error::Config(format!(
            "fixture needs between 2 and 17576 firms, got {}",
            spec.n_firms
        )));
    }
    if spec.months == 0 {
        return Err(Error::Config("fixture needs at least one month".into()));
    }
    let taxonomy = FeatureTaxonomy::shipped();
    let features: BTreeSet<String> = taxonomy
        .groups
        .keys()
        .chain(taxonomy.categories.values().flatten())
        .cloned()
        .collect();

    // about three firms per industry so the industry ANOVA has replication
    let n_industries = (spec.n_firms / 3).clamp(2, INDUSTRIES.len());
    let firms: Vec<FirmRecord> = (0..spec.n_firms)
        .map(|i| {
            let (industry, sector) = INDUSTRIES[i % n_industries];
            let ticker = fixture_ticker(i);
            FirmRecord {
                name: format!("{ticker} Holdings"),
                ticker,
                sector: sector.into(),
                industry: industry.into(),
            }
        })
        .collect();

    let mut panel = FeaturePanel::new(
        firms.iter().map(|f| f.ticker.clone()).collect(),
        (0..spec.months).map(month_label).collect(),
        features.into_iter().collect(),
    )?;
    let (n, m, f) = panel.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    for firm in 0..n {
        for feature in 0..f {
            let level = draw();
            for month in 0..m {
                panel.set(firm, month, feature, Some(level + 0.1 * draw()));
            }
        }
    }
    Ok(Universe {
        firms,
        panel,
        taxonomy,
    })
}

/// Writes `universe.csv` and `panel.csv` into `dir` (created if needed).
pub fn write_universe(universe: &Universe, dir: &Path) -> Result<UniversePaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let paths = UniversePaths {
        firms: dir.join("universe.csv"),
        panel: dir.join("panel.csv"),
        taxonomy: None,
    };
    let csv_err = |e: csv::Error| Error::Report(format!("writing fixture CSV: {e}"));

    let mut w = csv::Writer::from_path(&paths.firms).map_err(csv_err)?;
    w.write_record(["ticker", "name", "sector", "industry"]).map_err(csv_err)?;
    for f in &universe.firms {
        w.write_record([&f.ticker, &f.name, &f.sector, &f.industry]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing universe.csv", e))?;

    let panel = &universe.panel;
    let mut w = csv::Writer::from_path(&paths.panel).map_err(csv_err)?;
    w.write_record(["ticker", "month", "feature", "value"]).map_err(csv_err)?;
    let (n, m, f) = panel.shape();
    for firm in 0..n {
        for month in 0..m {
            for feature in 0..f {
                let value = panel.get(firm, month, feature).map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    panel.tickers()[firm].as_str(),
                    &panel.months()[month],
                    &panel.features()[feature],
                    &value,
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("writing panel.csv", e))?;
    Ok(paths)
}
