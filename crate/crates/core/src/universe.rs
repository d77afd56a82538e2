//! Firm universe, monthly feature panel and feature taxonomies.
//!
//! The panel is stored dense (firm × month × feature) with `None` marking a
//! missing cell. Loading validates every cross-file invariant up front so the
//! rest of the pipeline can treat a [`Universe`] as read-only and trusted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The prompt categories that carry a feature mapping.
pub const MAPPED_CATEGORIES: [&str; 4] = ["Fundamental", "Growth", "Risk", "Technical"];

const DEFAULT_TAXONOMY: &str = include_str!("../data/taxonomy.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub ticker: String,
    pub name: String,
    pub sector: String,
    pub industry: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    tickers: Vec<String>,
    months: Vec<String>,
    features: Vec<String>,
    values: Vec<Option<f64>>,
}

impl FeaturePanel {
    /// Creates an all-missing panel.
    pub fn new(tickers: Vec<String>, months: Vec<String>, features: Vec<String>) -> Result<Self> {
        check_unique("feature", &features)?;
        check_unique("ticker", &tickers)?;
        check_unique("month", &months)?;
        let len = tickers.len() * months.len() * features.len();
        Ok(FeaturePanel {
            tickers,
            months,
            features,
            values: vec![None; len],
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn months(&self) -> &[String] {
        &self.months
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn firm_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn feature_index(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f == feature)
    }

    pub fn month_index(&self, month: &str) -> Option<usize> {
        self.months.iter().position(|m| m == month)
    }

    fn offset(&self, firm: usize, month: usize, feature: usize) -> usize {
        (firm * self.months.len() + month) * self.features.len() + feature
    }

    pub fn get(&self, firm: usize, month: usize, feature: usize) -> Option<f64> {
        self.values[self.offset(firm, month, feature)]
    }

    /// Sets a cell; non-finite values are stored as missing.
    pub fn set(&mut self, firm: usize, month: usize, feature: usize, value: Option<f64>) {
        let idx = self.offset(firm, month, feature);
        self.values[idx] = value.filter(|v| v.is_finite());
    }

    /// Cross-sectional column for one (month, feature), in firm order.
    pub fn column(&self, month: usize, feature: usize) -> Vec<Option<f64>> {
        (0..self.tickers.len())
            .map(|firm| self.get(firm, month, feature))
            .collect()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.tickers.len(), self.months.len(), self.features.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTaxonomy {
    pub groups: BTreeMap<String, String>,
    pub categories: BTreeMap<String, Vec<String>>,
}

impl FeatureTaxonomy {
    /// Taxonomy shipped with the crate (feature groups and category mapping).
    pub fn shipped() -> Self {
        serde_json::from_str(DEFAULT_TAXONOMY).expect("shipped taxonomy is valid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let taxonomy: FeatureTaxonomy = serde_json::from_str(text)?;
        taxonomy.check_categories()?;
        Ok(taxonomy)
    }

    pub fn group_of(&self, feature: &str) -> Option<&str> {
        self.groups.get(feature).map(String::as_str)
    }

    fn check_categories(&self) -> Result<()> {
        let found: BTreeSet<&str> = self.categories.keys().map(String::as_str).collect();
        let expected: BTreeSet<&str> = MAPPED_CATEGORIES.iter().copied().collect();
        if found != expected {
            return Err(Error::Validation(format!(
                "taxonomy categories must be exactly {:?}, found {:?}",
                MAPPED_CATEGORIES, found
            )));
        }
        Ok(())
    }

    /// Every feature referenced by a category must exist in the panel.
    pub fn validate_against(&self, panel: &FeaturePanel) -> Result<()> {
        self.check_categories()?;
        for (category, features) in &self.categories {
            for feature in features {
                if panel.feature_index(feature).is_none() {
                    return Err(Error::Validation(format!(
                        "category {category} lists feature {feature:?} which is absent from the panel"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Universe {
    pub firms: Vec<FirmRecord>,
    pub panel: FeaturePanel,
    pub taxonomy: FeatureTaxonomy,
}

impl Universe {
    pub fn firm(&self, ticker: &str) -> Option<&FirmRecord> {
        self.firms.iter().find(|f| f.ticker == ticker)
    }

    pub fn sector_of(&self) -> BTreeMap<String, String> {
        self.firms
            .iter()
            .map(|f| (f.ticker.clone(), f.sector.clone()))
            .collect()
    }
}

/// Input files for [`load_universe`]. A missing taxonomy path selects the
/// shipped default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniversePaths {
    pub firms: PathBuf,
    pub panel: PathBuf,
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
}

impl UniversePaths {
    /// Conventional layout: `universe.csv`, `panel.csv` and optionally
    /// `taxonomy.json` inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        let taxonomy = dir.join("taxonomy.json");
        UniversePaths {
            firms: dir.join("universe.csv"),
            panel: dir.join("panel.csv"),
            taxonomy: taxonomy.exists().then_some(taxonomy),
        }
    }
}

pub fn load_universe(paths: &UniversePaths) -> Result<Universe> {
    let firms = read_firms(&paths.firms)?;
    let panel = read_panel(&paths.panel, &firms)?;
    let taxonomy = match &paths.taxonomy {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            FeatureTaxonomy::from_json(&text).map_err(|e| match e {
                Error::Json(err) => Error::Parse {
                    path: path.clone(),
                    line: err.line(),
                    message: err.to_string(),
                },
                other => other,
            })?
        }
        None => FeatureTaxonomy::shipped(),
    };
    taxonomy.validate_against(&panel)?;
    let (n, m, f) = panel.shape();
    log::info!("loaded universe: {n} firms, {m} months, {f} features");
    Ok(Universe {
        firms,
        panel,
        taxonomy,
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(format!("opening {}", path.display()), io),
            other => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("{other:?}"),
            },
        })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_line(err: &csv::Error) -> usize {
    err.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn expect_header(path: &Path, reader: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, csv_line(&e), e.to_string()))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn read_firms(path: &Path) -> Result<Vec<FirmRecord>> {
    let mut reader = csv_reader(path)?;
    expect_header(path, &mut reader, &["ticker", "name", "sector", "industry"])?;
    let mut firms = Vec::new();
    let mut seen = BTreeSet::new();
    let mut industry_sector: HashMap<String, String> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(path, csv_line(&e), e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let firm = FirmRecord {
            ticker: row[0].to_string(),
            name: row[1].to_string(),
            sector: row[2].to_string(),
            industry: row[3].to_string(),
        };
        if firm.ticker.is_empty() || firm.ticker.chars().any(char::is_whitespace) {
            return Err(parse_err(path, line, format!("invalid ticker {:?}", firm.ticker)));
        }
        if firm.name.is_empty() || firm.sector.is_empty() || firm.industry.is_empty() {
            return Err(parse_err(path, line, "name, sector and industry must be non-empty"));
        }
        if !seen.insert(firm.ticker.clone()) {
            return Err(Error::Validation(format!(
                "duplicate ticker {:?} (line {line})",
                firm.ticker
            )));
        }
        if let Some(previous) = industry_sector.get(&firm.industry) {
            if previous != &firm.sector {
                return Err(Error::Validation(format!(
                    "industry {:?} maps to both {previous:?} and {:?}",
                    firm.industry, firm.sector
                )));
            }
        } else {
            industry_sector.insert(firm.industry.clone(), firm.sector.clone());
        }
        firms.push(firm);
    }
    if firms.is_empty() {
        return Err(parse_err(path, 1, "universe file has no firms"));
    }
    Ok(firms)
}

fn valid_month(month: &str) -> bool {
    let bytes = month.as_bytes();
    if bytes.len() != 7 || bytes[4] != b'-' {
        return false;
    }
    let digits = |s: &[u8]| s.iter().all(u8::is_ascii_digit);
    if !digits(&bytes[..4]) || !digits(&bytes[5..]) {
        return false;
    }
    matches!(month[5..].parse::<u32>(), Ok(1..=12))
}

fn read_panel(path: &Path, firms: &[FirmRecord]) -> Result<FeaturePanel> {
    let mut reader = csv_reader(path)?;
    expect_header(path, &mut reader, &["ticker", "month", "feature", "value"])?;

    let known: BTreeSet<&str> = firms.iter().map(|f| f.ticker.as_str()).collect();
    let mut cells = Vec::new();
    let mut months = BTreeSet::new();
    let mut features: Vec<String> = Vec::new();
    let mut feature_seen = BTreeSet::new();

    for row in reader.records() {
        let row = row.map_err(|e| parse_err(path, csv_line(&e), e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let ticker = &row[0];
        if !known.contains(ticker) {
            return Err(Error::Validation(format!(
                "{}:{line}: ticker {ticker:?} is not in the universe",
                path.display()
            )));
        }
        let month = &row[1];
        if !valid_month(month) {
            return Err(parse_err(path, line, format!("month {month:?} is not YYYY-MM")));
        }
        let feature = &row[2];
        if feature.is_empty() {
            return Err(parse_err(path, line, "empty feature name"));
        }
        let value = match &row[3] {
            "" => None,
            raw => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("invalid value {raw:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(path, line, format!("non-finite value {raw:?}")));
                }
                Some(v)
            }
        };
        months.insert(month.to_string());
        if feature_seen.insert(feature.to_string()) {
            features.push(feature.to_string());
        }
        cells.push((line, ticker.to_string(), month.to_string(), feature.to_string(), value));
    }

    let tickers: Vec<String> = firms.iter().map(|f| f.ticker.clone()).collect();
    let mut panel = FeaturePanel::new(tickers, months.into_iter().collect(), features)?;
    let mut filled = BTreeSet::new();
    for (line, ticker, month, feature, value) in cells {
        let firm = panel.firm_index(&ticker).expect("checked above");
        let m = panel.month_index(&month).expect("collected above");
        let f = panel.feature_index(&feature).expect("collected above");
        if !filled.insert((firm, m, f)) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate cell ({ticker}, {month}, {feature})",
                path.display()
            )));
        }
        panel.set(firm, m, f, value);
    }
    Ok(panel)
}

fn check_unique(what: &str, items: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(Error::Validation(format!("duplicate {what} {item:?}")));
        }
    }
    Ok(())
}

/// Z-scores a single cross-sectional column using the sample standard
/// deviation. Columns with fewer than two observations or zero spread come
/// back all-missing.
pub fn standardize_column(column: &[Option<f64>]) -> Vec<Option<f64>> {
    let present: Vec<f64> = column.iter().flatten().copied().collect();
    if present.len() < 2 || present.iter().all(|&v| v == present[0]) {
        return vec![None; column.len()];
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let ss: f64 = present.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return vec![None; column.len()];
    }
    column.iter().map(|v| v.map(|v| (v - mean) / sd)).collect()
}

/// Standardizes each (month, feature) column independently across firms.
pub fn standardize_panel(panel: &FeaturePanel) -> FeaturePanel {
    let mut out = panel.clone();
    let (firms, months, features) = panel.shape();
    for m in 0..months {
        for f in 0..features {
            let z = standardize_column(&panel.column(m, f));
            for (firm, value) in z.into_iter().enumerate().take(firms) {
                out.set(firm, m, f, value);
            }
        }
    }
    out
}

/// How the monthly panel collapses to one value per firm and feature.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileReducer {
    #[default]
    Mean,
    LastMonth,
    Month(String),
}

impl std::str::FromStr for ProfileReducer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ProfileReducer::Mean),
            "last-month" => Ok(ProfileReducer::LastMonth),
            other if valid_month(other) => Ok(ProfileReducer::Month(other.to_string())),
            other => Err(Error::Config(format!(
                "profile reducer must be mean, last-month or YYYY-MM, got {other:?}"
            ))),
        }
    }
}

/// One firm's feature vector (panel feature order) reduced over months.
pub fn firm_profile(
    panel: &FeaturePanel,
    ticker: &str,
    reducer: &ProfileReducer,
) -> Result<Vec<Option<f64>>> {
    let firm = panel
        .firm_index(ticker)
        .ok_or_else(|| Error::UnknownTicker(ticker.to_string()))?;
    let (_, months, features) = panel.shape();
    let profile = match reducer {
        ProfileReducer::Mean => (0..features)
            .map(|f| {
                let vals: Vec<f64> = (0..months).filter_map(|m| panel.get(firm, m, f)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect(),
        ProfileReducer::LastMonth => match months.checked_sub(1) {
            Some(last) => (0..features).map(|f| panel.get(firm, last, f)).collect(),
            None => vec![None; features],
        },
        ProfileReducer::Month(month) => {
            let m = panel
                .month_index(month)
                .ok_or_else(|| Error::Config(format!("month {month} is not in the panel")))?;
            (0..features).map(|f| panel.get(firm, m, f)).collect()
        }
    };
    Ok(profile)
}

/// Reduced standardized features for every firm in a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    features: Vec<String>,
    rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl Profiles {
    /// Standardizes the panel and reduces it per firm.
    pub fn from_panel(panel: &FeaturePanel, reducer: &ProfileReducer) -> Result<Self> {
        let standardized = standardize_panel(panel);
        let mut rows = BTreeMap::new();
        for ticker in standardized.tickers() {
            rows.insert(ticker.clone(), firm_profile(&standardized, ticker, reducer)?);
        }
        Ok(Profiles {
            features: panel.features().to_vec(),
            rows,
        })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn get(&self, ticker: &str, feature: &str) -> Option<f64> {
        let idx = self.features.iter().position(|f| f == feature)?;
        self.rows.get(ticker)?[idx]
    }

    pub fn contains(&self, ticker: &str) -> bool {
        self.rows.contains_key(ticker)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn taxonomy_json(risk: &[&str]) -> String {
        let risk: Vec<String> = risk.iter().map(|s| format!("{s:?}")).collect();
        format!(
            r#"{{"groups": {{"size": "Valuation Ratios"}},
                "categories": {{"Fundamental": ["size"], "Growth": [], "Risk": [{}], "Technical": ["mom"]}}}}"#,
            risk.join(",")
        )
    }

    const FIRMS: &str = "ticker,name,sector,industry\n\
        AAA,Alpha Corp,Technology,Semiconductors\n\
        BBB,Beta Inc,Energy,Oil & Gas Integrated\n\
        CCC,Gamma Ltd,Technology,Semiconductors\n";

    const PANEL: &str = "ticker,month,feature,value\n\
        AAA,2020-01,size,1\nBBB,2020-01,size,2\nCCC,2020-01,size,3\n\
        AAA,2020-02,size,10\nBBB,2020-02,size,20\nCCC,2020-02,size,\n\
        AAA,2020-01,mom,0.5\nBBB,2020-01,mom,0.1\nCCC,2020-01,mom,-0.2\n\
        AAA,2020-01,beta,1.1\nBBB,2020-01,beta,0.9\nCCC,2020-01,beta,1.4\n";

    fn fixture(firms: &str, risk: &[&str]) -> (tempfile::TempDir, UniversePaths) {
        let dir = tempfile::tempdir().unwrap();
        let paths = UniversePaths {
            firms: write(dir.path(), "universe.csv", firms),
            panel: write(dir.path(), "panel.csv", PANEL),
            taxonomy: Some(write(dir.path(), "taxonomy.json", &taxonomy_json(risk))),
        };
        (dir, paths)
    }

    #[test]
    fn loads_three_firm_fixture() {
        let (_dir, paths) = fixture(FIRMS, &["beta"]);
        let universe = load_universe(&paths).unwrap();
        assert_eq!(universe.firms.len(), 3);
        assert_eq!(universe.panel.shape(), (3, 2, 3));
        assert_eq!(universe.panel.months(), ["2020-01", "2020-02"]);
        let ccc = universe.panel.firm_index("CCC").unwrap();
        assert_eq!(universe.panel.get(ccc, 1, 0), None);
        assert_eq!(universe.firm("BBB").unwrap().sector, "Energy");
    }

    #[test]
    fn duplicate_ticker_is_named() {
        let firms = format!("{FIRMS}AAA,Again,Energy,Oil & Gas Integrated\n");
        let (_dir, paths) = fixture(&firms, &["beta"]);
        let err = load_universe(&paths).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("\"AAA\""), "{err}");
    }

    #[test]
    fn unknown_category_feature_is_named() {
        let (_dir, paths) = fixture(FIRMS, &["beta", "foo"]);
        let err = load_universe(&paths).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("\"foo\""), "{err}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let paths = UniversePaths {
            firms: write(dir.path(), "universe.csv", FIRMS),
            panel: write(
                dir.path(),
                "panel.csv",
                "ticker,month,feature,value\nAAA,2020-01,size,1\nBBB,2020-13,size,2\n",
            ),
            taxonomy: None,
        };
        match load_universe(&paths).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn industry_must_map_to_one_sector() {
        let firms = "ticker,name,sector,industry\nAAA,A,Technology,Banks - Regional\nBBB,B,Financial Services,Banks - Regional\n";
        let (_dir, paths) = fixture(firms, &[]);
        assert!(matches!(load_universe(&paths), Err(Error::Validation(_))));
    }

    #[test]
    fn shipped_taxonomy_has_mapped_categories() {
        let tax = FeatureTaxonomy::shipped();
        let keys: Vec<&str> = tax.categories.keys().map(String::as_str).collect();
        assert_eq!(keys, MAPPED_CATEGORIES);
        assert_eq!(tax.categories["Risk"].len(), 6);
        assert_eq!(tax.categories["Fundamental"].len(), 11);
        assert_eq!(tax.categories["Technical"].len(), 11);
        assert_eq!(tax.categories["Growth"].len(), 3);
        assert_eq!(tax.groups.len(), 40);
        assert_eq!(tax.group_of("free_cash_flow"), Some("Financial Health"));
    }

    #[test]
    fn standardize_examples() {
        let z = standardize_column(&[Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(z, vec![Some(-1.0), Some(0.0), Some(1.0)]);

        assert_eq!(standardize_column(&[Some(5.0); 3]), vec![None; 3]);

        let z = standardize_column(&[Some(10.0), Some(20.0)]);
        // sd = sqrt(50) = 7.0711, z = ±5/7.0711
        assert!(close(z[0].unwrap(), -0.5f64.sqrt(), 1e-12));
        assert!(close(z[1].unwrap(), 0.5f64.sqrt(), 1e-12));

        assert_eq!(standardize_column(&[Some(1.0), None]), vec![None, None]);
        let z = standardize_column(&[Some(1.0), None, Some(3.0)]);
        assert_eq!(z[1], None);
        assert!(close(z[0].unwrap(), -0.5f64.sqrt(), 1e-12));
    }

    #[test]
    fn constant_decimal_column_is_degenerate() {
        assert_eq!(standardize_column(&[Some(0.1); 7]), vec![None; 7]);
    }

    #[test]
    fn profile_reducers() {
        let mut panel = FeaturePanel::new(
            vec!["A".into(), "B".into()],
            vec!["2020-01".into(), "2020-02".into()],
            vec!["f".into(), "g".into()],
        )
        .unwrap();
        panel.set(0, 0, 0, Some(0.5));
        panel.set(0, 1, 0, Some(0.7));
        let mean = firm_profile(&panel, "A", &ProfileReducer::Mean).unwrap();
        assert!(close(mean[0].unwrap(), 0.6, 1e-15));
        assert_eq!(mean[1], None);

        let last = firm_profile(&panel, "A", &ProfileReducer::LastMonth).unwrap();
        assert_eq!(last[0], Some(0.7));
        let first = firm_profile(&panel, "A", &"2020-01".parse().unwrap()).unwrap();
        assert_eq!(first[0], Some(0.5));

        assert!(matches!(
            firm_profile(&panel, "ZZZ", &ProfileReducer::Mean),
            Err(Error::UnknownTicker(_))
        ));
    }

    #[test]
    fn single_month_profile_is_identity() {
        let mut panel =
            FeaturePanel::new(vec!["A".into()], vec!["2021-06".into()], vec!["f".into(), "g".into()])
                .unwrap();
        panel.set(0, 0, 0, Some(-1.25));
        panel.set(0, 0, 1, Some(3.0));
        let profile = firm_profile(&panel, "A", &ProfileReducer::Mean).unwrap();
        assert_eq!(profile, vec![Some(-1.25), Some(3.0)]);
    }
}
