//! Backends selected by name at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::openai::{OpenAiBackend, OpenAiConfig};
use super::synthetic::{SyntheticBackend, SyntheticBiasParams};
use super::ModelBackend;
use crate::error::{Error, Result};
use crate::universe::{ProfileReducer, Profiles, Universe};

fn default_kind() -> String {
    "synthetic".into()
}

fn default_timeout() -> u64 {
    60
}

/// Backend section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub synthetic: SyntheticBiasParams,
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec {
            kind: default_kind(),
            endpoint: None,
            model: None,
            api_key_env: None,
            timeout_secs: default_timeout(),
            synthetic: SyntheticBiasParams::default(),
        }
    }
}

/// What a factory may need besides its spec.
pub struct BackendContext<'a> {
    pub universe: &'a Universe,
    pub reducer: &'a ProfileReducer,
}

pub type BackendFactory =
    Box<dyn Fn(&BackendSpec, &BackendContext<'_>) -> Result<Arc<dyn ModelBackend>> + Send + Sync>;

pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: impl Into<String>, factory: BackendFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, spec: &BackendSpec, ctx: &BackendContext<'_>) -> Result<Arc<dyn ModelBackend>> {
        let factory = self.factories.get(&spec.kind).ok_or_else(|| {
            Error::Config(format!(
                "unknown backend kind {:?} (available: {})",
                spec.kind,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(spec, ctx)
    }
}

impl Default for BackendRegistry {
    /// `synthetic` and `openai`.
    fn default() -> Self {
        let mut registry = BackendRegistry::empty();
        registry.register(
            "synthetic",
            Box::new(|spec, ctx| {
                let profiles = Profiles::from_panel(&ctx.universe.panel, ctx.reducer)?;
                let backend = SyntheticBackend::new(spec.synthetic.clone(), profiles, ctx.universe.sector_of())?;
                Ok(Arc::new(backend))
            }),
        );
        registry.register(
            "openai",
            Box::new(|spec, _| {
                let required = |v: &Option<String>, what: &str| {
                    v.clone()
                        .ok_or_else(|| Error::Config(format!("openai backend needs {what}")))
                };
                let backend = OpenAiBackend::new(&OpenAiConfig {
                    endpoint: required(&spec.endpoint, "an endpoint")?,
                    model: required(&spec.model, "a model id")?,
                    api_key_env: spec.api_key_env.clone(),
                    timeout_secs: spec.timeout_secs,
                })?;
                Ok(Arc::new(backend))
            }),
        );
        registry
    }
}
