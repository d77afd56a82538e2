//! Ground-truth bias generator used to validate the audit pipeline.
//!
//! Each candidate gets a logit built from known ingredients (a size effect,
//! sector offsets, per-category feature loadings, a per-firm category offset,
//! a first-position bonus and seeded noise). The backend then reports the
//! two-way log-softmax of those logits as candidate log-probabilities.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CandidateScore, ModelBackend};
use crate::error::{BackendError, Error, Result};
use crate::hashing::seed_from_parts;
use crate::protocol::ComparisonTask;
use crate::universe::Profiles;

fn default_size_feature() -> String {
    "market_cap".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBiasParams {
    pub size_coeff: f64,
    /// Profile feature that plays the role of firm size.
    pub size_feature: String,
    pub sector_offsets: BTreeMap<String, f64>,
    pub order_coeff: f64,
    pub noise_sd: f64,
    pub seed: u64,
    /// category → feature → loading, applied only to that category's prompts.
    pub category_feature_coeffs: BTreeMap<String, BTreeMap<String, f64>>,
    /// SD of a per-(firm, category) offset drawn once per firm and category.
    pub category_offset_sd: f64,
}

impl Default for SyntheticBiasParams {
    fn default() -> Self {
        SyntheticBiasParams {
            size_coeff: 0.0,
            size_feature: default_size_feature(),
            sector_offsets: BTreeMap::new(),
            order_coeff: 0.0,
            noise_sd: 0.0,
            seed: 0,
            category_feature_coeffs: BTreeMap::new(),
            category_offset_sd: 0.0,
        }
    }
}

impl SyntheticBiasParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.size_coeff, self.order_coeff, self.noise_sd, self.category_offset_sd]
            .iter()
            .chain(self.sector_offsets.values())
            .chain(self.category_feature_coeffs.values().flat_map(|m| m.values()))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("synthetic parameters must be finite".into()));
        }
        if self.noise_sd < 0.0 || self.category_offset_sd < 0.0 {
            return Err(Error::Config("synthetic standard deviations must be >= 0".into()));
        }
        Ok(())
    }
}

fn standard_normal(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StandardNormal.sample(&mut rng)
}

/// Per-firm offset for one category; fixed for a given (ticker, category, seed).
pub(crate) fn category_offset(params: &SyntheticBiasParams, ticker: &str, category: &str) -> f64 {
    if params.category_offset_sd == 0.0 {
        return 0.0;
    }
    let seed = seed_from_parts(&["category-offset", ticker, category, &params.seed.to_string()]);
    params.category_offset_sd * standard_normal(seed)
}

fn feature(profiles: &Profiles, ticker: &str, feature: &str) -> std::result::Result<f64, BackendError> {
    profiles.get(ticker, feature).ok_or_else(|| {
        BackendError::Task(format!("firm {ticker} has no profile value for {feature}"))
    })
}

fn logit(
    task: &ComparisonTask,
    ticker: &str,
    first: bool,
    params: &SyntheticBiasParams,
    profiles: &Profiles,
    sectors: &BTreeMap<String, String>,
) -> std::result::Result<f64, BackendError> {
    let mut l = 0.0;
    if params.size_coeff != 0.0 {
        l += params.size_coeff * feature(profiles, ticker, &params.size_feature)?;
    }
    if let Some(offset) = sectors.get(ticker).and_then(|s| params.sector_offsets.get(s)) {
        l += offset;
    }
    if let Some(loadings) = params.category_feature_coeffs.get(&task.category) {
        for (name, coeff) in loadings.iter().filter(|(_, c)| **c != 0.0) {
            l += coeff * feature(profiles, ticker, name)?;
        }
    }
    l += category_offset(params, ticker, &task.category);
    if first {
        l += params.order_coeff;
    }
    if params.noise_sd > 0.0 {
        let position = if first { "first" } else { "second" };
        let seed = seed_from_parts(&[&task.task_key, &params.seed.to_string(), position]);
        l += params.noise_sd * standard_normal(seed);
    }
    Ok(l)
}

/// Raw logits (first-listed, second-listed) for a task.
pub fn synthetic_score(
    task: &ComparisonTask,
    params: &SyntheticBiasParams,
    profiles: &Profiles,
    sectors: &BTreeMap<String, String>,
) -> std::result::Result<(f64, f64), BackendError> {
    for ticker in [task.first(), task.second()] {
        if !profiles.contains(ticker) {
            return Err(BackendError::Task(format!("no profile for firm {ticker}")));
        }
    }
    Ok((
        logit(task, task.first(), true, params, profiles, sectors)?,
        logit(task, task.second(), false, params, profiles, sectors)?,
    ))
}

pub struct SyntheticBackend {
    params: SyntheticBiasParams,
    profiles: Profiles,
    sectors: BTreeMap<String, String>,
    model_id: String,
}

impl SyntheticBackend {
    pub fn new(params: SyntheticBiasParams, profiles: Profiles, sectors: BTreeMap<String, String>) -> Result<Self> {
        params.validate()?;
        let model_id = format!("synthetic-seed{}", params.seed);
        Ok(SyntheticBackend {
            params,
            profiles,
            sectors,
            model_id,
        })
    }

    pub fn params(&self) -> &SyntheticBiasParams {
        &self.params
    }
}

impl ModelBackend for SyntheticBackend {
    fn backend_id(&self) -> &str {
        "synthetic"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score_candidate(&self, task: &ComparisonTask, ticker: &str) -> std::result::Result<CandidateScore, BackendError> {
        let (first, second) = self.score_pair(task, task.first(), task.second())?;
        [first, second]
            .into_iter()
            .find(|s| s.ticker == ticker)
            .ok_or_else(|| BackendError::Task(format!("{ticker} is not a candidate of this task")))
    }

    /// Reports the log-softmax of the two logits so both values are ≤ 0.
    fn score_pair(
        &self,
        task: &ComparisonTask,
        first: &str,
        second: &str,
    ) -> std::result::Result<(CandidateScore, CandidateScore), BackendError> {
        let (l1, l2) = synthetic_score(task, &self.params, &self.profiles, &self.sectors)?;
        let (l1, l2) = if first == task.first() { (l1, l2) } else { (l2, l1) };
        let top = l1.max(l2);
        let lse = top + (-(l1 - l2).abs()).exp().ln_1p();
        let score = |ticker: &str, l: f64| {
            CandidateScore::from_subtokens(ticker, vec![(ticker.to_string(), l - lse)])
        };
        Ok((score(first, l1), score(second, l2)))
    }
}
