//! OpenAI-compatible completions backend.
//!
//! Each candidate is scored by sending `prompt + " " + ticker` with
//! `echo: true` and per-token log-probabilities, then summing the
//! log-probabilities of the tokens that cover the appended continuation.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CandidateScore, ModelBackend};
use crate::error::{BackendError, Error, Result};
use crate::protocol::ComparisonTask;

/// Separator placed between the prompt and the scored ticker.
pub const CONTINUATION_PREFIX: &str = " ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenAiConfig {
    /// Base URL (`…/v1`) or the full `…/completions` URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key; no key is sent when unset.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

pub struct OpenAiBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    backend_id: String,
}

impl OpenAiBackend {
    pub fn new(config: &OpenAiConfig) -> Result<Self> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("openai backend needs an endpoint".into()));
        }
        if config.model.is_empty() {
            return Err(Error::Config("openai backend needs a model id".into()));
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let trimmed = config.endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(OpenAiBackend {
            client,
            backend_id: format!("openai:{url}"),
            url,
            model: config.model.clone(),
            api_key,
        })
    }

    fn request(&self, text: &str) -> std::result::Result<Value, BackendError> {
        let body = json!({
            "model": self.model,
            "prompt": text,
            "max_tokens": 1,
            "temperature": 0,
            "echo": true,
            "logprobs": 0,
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Transport(format!("{}: {e}", self.url)))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(format!("reading response: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transport(format!("HTTP {status}: {}", truncate(&text))));
        }
        if !status.is_success() {
            return Err(BackendError::Capability(format!("HTTP {status}: {}", truncate(&text))));
        }
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Capability(format!("response is not JSON: {e}")))
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Sums the log-probabilities of the echoed tokens covering characters
/// `[prompt_chars, prompt_chars + continuation_chars)`.
///
/// `response` is a completions response body; only `choices[0].logprobs`
/// is read. Tokens past the continuation (generated ones) are ignored.
pub fn continuation_logprob(
    response: &Value,
    ticker: &str,
    prompt_chars: usize,
    continuation_chars: usize,
) -> std::result::Result<CandidateScore, BackendError> {
    let logprobs = response
        .pointer("/choices/0/logprobs")
        .filter(|v| !v.is_null())
        .ok_or_else(|| BackendError::Capability("response carries no logprobs".into()))?;
    let field = |name: &str| {
        logprobs
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Capability(format!("logprobs.{name} missing")))
    };
    let tokens = field("tokens")?;
    let token_logprobs = field("token_logprobs")?;
    let offsets = field("text_offset")?;
    if tokens.len() != token_logprobs.len() || tokens.len() != offsets.len() {
        return Err(BackendError::Capability("logprobs arrays differ in length".into()));
    }

    let end = prompt_chars + continuation_chars;
    let mut picked = Vec::new();
    for i in 0..tokens.len() {
        let start = offsets[i]
            .as_u64()
            .ok_or_else(|| BackendError::Capability("non-integer text_offset".into()))?
            as usize;
        let token = tokens[i].as_str().unwrap_or_default();
        let stop = match offsets.get(i + 1).and_then(Value::as_u64) {
            Some(next) => next as usize,
            None => start + token.chars().count(),
        };
        if start >= end || stop <= prompt_chars {
            continue;
        }
        let lp = token_logprobs[i].as_f64().ok_or_else(|| {
            BackendError::Capability(format!("no log-probability for continuation token {token:?}"))
        })?;
        picked.push((token.to_string(), lp));
    }
    if picked.is_empty() {
        return Err(BackendError::Task(format!("ticker {ticker} produced no sub-tokens")));
    }
    Ok(CandidateScore::from_subtokens(ticker, picked))
}

impl ModelBackend for OpenAiBackend {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn score_candidate(&self, task: &ComparisonTask, ticker: &str) -> std::result::Result<CandidateScore, BackendError> {
        let continuation = format!("{CONTINUATION_PREFIX}{ticker}");
        let text = format!("{}{continuation}", task.rendered_prompt);
        let response = self.request(&text)?;
        continuation_logprob(
            &response,
            ticker,
            task.rendered_prompt.chars().count(),
            continuation.chars().count(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(tokens: &[(&str, Option<f64>)]) -> Value {
        let mut offset = 0;
        let mut offsets = Vec::new();
        for (tok, _) in tokens {
            offsets.push(offset);
            offset += tok.chars().count();
        }
        json!({
            "choices": [{
                "text": tokens.iter().map(|t| t.0).collect::<String>(),
                "logprobs": {
                    "tokens": tokens.iter().map(|t| t.0).collect::<Vec<_>>(),
                    "token_logprobs": tokens.iter().map(|t| t.1).collect::<Vec<_>>(),
                    "text_offset": offsets,
                }
            }]
        })
    }

    #[test]
    fn sums_continuation_tokens_only() {
        let r = response(&[
            ("Pick", None),
            (" one.", Some(-2.0)),
            (" AA", Some(-0.05)),
            ("PL", Some(-0.15)),
            ("\n", Some(-3.0)),
        ]);
        let score = continuation_logprob(&r, "AAPL", 9, 5).unwrap();
        assert_eq!(score.subtoken_logprobs.len(), 2);
        assert!((score.total_logprob - -0.2).abs() < 1e-12);
    }

    #[test]
    fn missing_logprobs_is_a_capability_error() {
        let r = json!({"choices": [{"text": "x", "logprobs": null}]});
        assert!(matches!(
            continuation_logprob(&r, "A", 1, 2),
            Err(BackendError::Capability(_))
        ));
        let r = response(&[("Pick", None), (" A", None)]);
        assert!(matches!(
            continuation_logprob(&r, "A", 4, 2),
            Err(BackendError::Capability(_))
        ));
    }

    #[test]
    fn no_continuation_tokens_is_a_task_error() {
        let r = response(&[("Pick", None), (" one.", Some(-1.0))]);
        assert!(matches!(
            continuation_logprob(&r, "A", 9, 2),
            Err(BackendError::Task(_))
        ));
    }

    #[test]
    fn url_normalization() {
        let cfg = |endpoint: &str| OpenAiConfig {
            endpoint: endpoint.into(),
            model: "m".into(),
            api_key_env: None,
            timeout_secs: 5,
        };
        assert_eq!(OpenAiBackend::new(&cfg("http://h/v1")).unwrap().url, "http://h/v1/completions");
        assert_eq!(OpenAiBackend::new(&cfg("http://h/v1/")).unwrap().url, "http://h/v1/completions");
        assert_eq!(
            OpenAiBackend::new(&cfg("http://h/v1/completions")).unwrap().url,
            "http://h/v1/completions"
        );
        assert!(matches!(OpenAiBackend::new(&cfg("")), Err(Error::Config(_))));
    }

    #[test]
    fn missing_key_variable_is_a_config_error() {
        let cfg = OpenAiConfig {
            endpoint: "http://h/v1".into(),
            model: "m".into(),
            api_key_env: Some("BIASAUDIT_TEST_SURELY_UNSET_VAR".into()),
            timeout_secs: 5,
        };
        assert!(matches!(OpenAiBackend::new(&cfg), Err(Error::Config(_))));
    }
}
