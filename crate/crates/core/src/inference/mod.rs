//! Scoring comparisons against a model backend.
//!
//! A backend reports, for each candidate ticker, the summed log-probability of
//! its sub-tokens as the forced continuation of the rendered prompt. The
//! two-way softmax over those sums is the comparison's confidence; scoring
//! exactly the two candidates is what constrains the answer to `{i, j}`.

mod batch;
mod openai;
mod registry;
mod store;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::protocol::ComparisonTask;

pub use batch::{run_batch, BatchOptions, RetryPolicy, RunSummary};
pub use openai::{continuation_logprob, OpenAiBackend, OpenAiConfig};
pub use registry::{BackendContext, BackendFactory, BackendRegistry, BackendSpec};
pub use store::{read_records, ErrorEntry, ResultStore};
pub use synthetic::{synthetic_score, SyntheticBackend, SyntheticBiasParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub ticker: String,
    /// (token text, log-probability in nats)
    pub subtoken_logprobs: Vec<(String, f64)>,
    pub total_logprob: f64,
}

impl CandidateScore {
    pub fn from_subtokens(ticker: impl Into<String>, subtoken_logprobs: Vec<(String, f64)>) -> Self {
        let total_logprob = subtoken_logprobs.iter().map(|(_, lp)| lp).sum();
        CandidateScore {
            ticker: ticker.into(),
            subtoken_logprobs,
            total_logprob,
        }
    }

    fn check(&self) -> std::result::Result<(), BackendError> {
        if self.subtoken_logprobs.is_empty() {
            return Err(BackendError::Task(format!(
                "ticker {} produced no sub-tokens",
                self.ticker
            )));
        }
        if let Some((tok, lp)) = self
            .subtoken_logprobs
            .iter()
            .find(|(_, lp)| !lp.is_finite() || *lp > 0.0)
        {
            return Err(BackendError::Numeric(format!(
                "invalid log-probability {lp} for token {tok:?} of {}",
                self.ticker
            )));
        }
        let sum: f64 = self.subtoken_logprobs.iter().map(|(_, lp)| lp).sum();
        if (sum - self.total_logprob).abs() > 1e-9 {
            return Err(BackendError::Numeric(format!(
                "total log-probability {} of {} disagrees with its sub-tokens ({sum})",
                self.total_logprob, self.ticker
            )));
        }
        Ok(())
    }
}

/// A model that can score a ticker as the continuation of a prompt.
///
/// Implementations must be safe to call from several worker threads.
pub trait ModelBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn model_id(&self) -> &str;

    /// Log-probability of `ticker` following `task.rendered_prompt`.
    fn score_candidate(&self, task: &ComparisonTask, ticker: &str) -> std::result::Result<CandidateScore, BackendError>;

    /// Scores both candidates, `first` being the one shown as `{company1}`.
    fn score_pair(
        &self,
        task: &ComparisonTask,
        first: &str,
        second: &str,
    ) -> std::result::Result<(CandidateScore, CandidateScore), BackendError> {
        Ok((self.score_candidate(task, first)?, self.score_candidate(task, second)?))
    }
}

/// Two-way softmax of candidate log-probabilities.
///
/// The larger side is computed as 1/(1+e^{−|Δ|}) and the smaller as its
/// complement, so the pair sums to exactly 1 and swapping the arguments swaps
/// the outputs bit for bit.
pub fn pair_confidence(l_i: f64, l_j: f64) -> Result<(f64, f64)> {
    if !l_i.is_finite() || !l_j.is_finite() {
        return Err(Error::Numeric(format!(
            "log-probabilities must be finite, got ({l_i}, {l_j})"
        )));
    }
    let delta = l_i - l_j;
    let high = 1.0 / (1.0 + (-delta.abs()).exp());
    let low = 1.0 - high;
    Ok(if delta >= 0.0 { (high, low) } else { (low, high) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub task_key: String,
    pub firm_a: String,
    pub firm_b: String,
    pub category: String,
    pub variant: u8,
    pub order: u8,
    pub rep: u32,
    pub chosen: String,
    pub confidence: f64,
    pub l_first: f64,
    pub l_second: f64,
    pub backend_id: String,
    pub model_id: String,
    pub ts: String,
}

impl ComparisonRecord {
    pub fn first(&self) -> &str {
        if self.order == 1 {
            &self.firm_a
        } else {
            &self.firm_b
        }
    }

    pub fn second(&self) -> &str {
        if self.order == 1 {
            &self.firm_b
        } else {
            &self.firm_a
        }
    }

    pub fn other(&self) -> &str {
        if self.chosen == self.firm_a {
            &self.firm_b
        } else {
            &self.firm_a
        }
    }
}

/// A record together with the per-candidate token detail it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredComparison {
    pub record: ComparisonRecord,
    pub score_first: CandidateScore,
    pub score_second: CandidateScore,
}

/// Source of record timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    System,
    /// Every record carries this timestamp (reproducible stores).
    Fixed(String),
}

impl Clock {
    pub fn now(&self) -> String {
        match self {
            Clock::System => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            Clock::Fixed(ts) => ts.clone(),
        }
    }
}

pub fn score_task(
    task: &ComparisonTask,
    backend: &dyn ModelBackend,
    clock: &Clock,
) -> std::result::Result<ScoredComparison, BackendError> {
    let (first, second) = (task.first(), task.second());
    let (score_first, score_second) = backend.score_pair(task, first, second)?;
    score_first.check()?;
    score_second.check()?;
    let (l_first, l_second) = (score_first.total_logprob, score_second.total_logprob);
    let (p_first, p_second) =
        pair_confidence(l_first, l_second).map_err(|e| BackendError::Numeric(e.to_string()))?;

    let (chosen, confidence) = if l_first > l_second {
        (first, p_first)
    } else if l_second > l_first {
        (second, p_second)
    } else {
        // exact tie: lexicographically smaller ticker
        (task.firm_a.as_str(), 0.5)
    };
    Ok(ScoredComparison {
        record: ComparisonRecord {
            task_key: task.task_key.clone(),
            firm_a: task.firm_a.clone(),
            firm_b: task.firm_b.clone(),
            category: task.category.clone(),
            variant: task.variant,
            order: task.order,
            rep: task.rep,
            chosen: chosen.to_string(),
            confidence,
            l_first,
            l_second,
            backend_id: backend.backend_id().to_string(),
            model_id: backend.model_id().to_string(),
            ts: clock.now(),
        },
        score_first,
        score_second,
    })
}
