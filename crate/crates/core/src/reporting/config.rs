use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::{DispersionOptions, SectorReducer, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::inference::BackendSpec;
use crate::protocol::{ScheduleParams, TemplateSet};
use crate::stats::{BootstrapSpec, MIN_BOOTSTRAP_ITERS};
use crate::universe::{ProfileReducer, UniversePaths};

/// How p-values are grouped for the BH adjustment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdrFamily {
    /// One family per correlation method, across features.
    #[default]
    PerMethod,
    /// Every row of a report in one family.
    Pooled,
}

/// Which firm score RQ1 correlates against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rq1Source {
    /// `baseline` records when the store has them, otherwise every record.
    #[default]
    Auto,
    Baseline,
    All,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimestampMode {
    /// Fixed for the synthetic backend, wall clock otherwise.
    #[default]
    Auto,
    System,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsParams {
    pub bootstrap_iters: usize,
    pub bootstrap_seed: u64,
    pub eps: f64,
    /// `mean`, `last-month` or a `YYYY-MM` month.
    pub profile_reducer: String,
    pub sector_reducer: SectorReducer,
    pub fdr_family: FdrFamily,
    pub rq1_source: Rq1Source,
    pub scale_mad: bool,
    /// Exact permutation p-values for Spearman when n ≤ 10.
    pub spearman_exact: bool,
}

impl Default for StatsParams {
    fn default() -> Self {
        StatsParams {
            bootstrap_iters: 1000,
            bootstrap_seed: 0,
            eps: DEFAULT_EPS,
            profile_reducer: "mean".into(),
            sector_reducer: SectorReducer::Mean,
            fdr_family: FdrFamily::PerMethod,
            rq1_source: Rq1Source::Auto,
            scale_mad: false,
            spearman_exact: false,
        }
    }
}

impl StatsParams {
    pub fn validate(&self) -> Result<()> {
        if self.bootstrap_iters < MIN_BOOTSTRAP_ITERS {
            return Err(Error::Config(format!(
                "bootstrap_iters must be at least {MIN_BOOTSTRAP_ITERS}, got {}",
                self.bootstrap_iters
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::Config(format!("eps must lie in (0, 0.5), got {}", self.eps)));
        }
        self.reducer().map(|_| ())
    }

    pub fn reducer(&self) -> Result<ProfileReducer> {
        self.profile_reducer.parse()
    }

    pub fn bootstrap(&self) -> BootstrapSpec {
        BootstrapSpec {
            iters: self.bootstrap_iters,
            seed: self.bootstrap_seed,
        }
    }

    pub fn dispersion(&self) -> DispersionOptions {
        DispersionOptions {
            eps: self.eps,
            scale_mad: self.scale_mad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub parallelism: usize,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub timestamps: TimestampMode,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            parallelism: 1,
            max_retries: 3,
            retry_base_ms: 1000,
            timestamps: TimestampMode::Auto,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub universe: UniversePaths,
    /// Templates JSON; the shipped set when absent.
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub stats: StatsParams,
}

impl RunConfig {
    /// A config with defaults everywhere except the universe location.
    pub fn new(universe: UniversePaths, out: PathBuf) -> Self {
        RunConfig {
            universe,
            templates: None,
            out,
            schedule: ScheduleParams::default(),
            backend: BackendSpec::default(),
            run: RunParams::default(),
            stats: StatsParams::default(),
        }
    }

    /// Parses a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.universe.firms);
        join(&mut self.universe.panel);
        if let Some(t) = &mut self.universe.taxonomy {
            join(t);
        }
        if let Some(t) = &mut self.templates {
            join(t);
        }
        join(&mut self.out);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    /// Checks values and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        let mut inputs = vec![&self.universe.firms, &self.universe.panel];
        inputs.extend(self.universe.taxonomy.as_ref());
        inputs.extend(self.templates.as_ref());
        for path in inputs {
            if !path.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", path.display())));
            }
        }
        self.schedule.validate()?;
        if self.run.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        self.backend.synthetic.validate()?;
        self.stats.validate()
    }

    pub fn templates(&self) -> Result<TemplateSet> {
        match &self.templates {
            Some(path) => TemplateSet::load(path),
            None => Ok(TemplateSet::shipped()),
        }
    }

    pub fn store_path(&self) -> PathBuf {
        self.out.join("store.jsonl")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out.join("manifest.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        fs::write(
            &path,
            "[universe]\nfirms = \"u.csv\"\npanel = \"p.csv\"\n\n[backend.synthetic]\nsize_coeff = 1.0\n",
        )
        .unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.universe.firms, dir.path().join("u.csv"));
        assert_eq!(config.out, dir.path().join("out"));
        assert_eq!(config.schedule, ScheduleParams::default());
        assert_eq!(config.backend.kind, "synthetic");
        assert_eq!(config.backend.synthetic.size_coeff, 1.0);
        assert_eq!(config.stats.bootstrap_iters, 1000);
        // inputs are missing
        assert!(matches!(config.validate(), Err(Error::Config(m)) if m.contains("u.csv")));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        fs::write(&path, "[universe]\nfirms = \"u\"\npanel = \"p\"\n[stats]\nbootstrap_itres = 5\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));

        let params = StatsParams { bootstrap_iters: 50, ..StatsParams::default() };
        assert!(params.validate().is_err());
        let params = StatsParams { profile_reducer: "median".into(), ..StatsParams::default() };
        assert!(params.validate().is_err());
        let params = StatsParams { profile_reducer: "2020-06".into(), ..StatsParams::default() };
        assert_eq!(params.reducer().unwrap(), ProfileReducer::Month("2020-06".into()));
    }

    #[test]
    fn toml_round_trip() {
        let config = RunConfig::new(
            UniversePaths {
                firms: "/d/u.csv".into(),
                panel: "/d/p.csv".into(),
                taxonomy: None,
            },
            "/d/out".into(),
        );
        let text = config.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn missing_config_file_names_the_path() {
        let err = RunConfig::load(Path::new("/nonexistent/audit.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/audit.toml"));
        assert_eq!(err.exit_code(), 2);
    }
}
