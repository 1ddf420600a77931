use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmojiDistribution, S2epaError, EMOJI_COUNT};
use crate::Scalar;

/// Sums within this distance of 1 are renormalized rather than rejected.
pub const RENORMALIZE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEndpointConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for ClassifierEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8090".into(),
            timeout_ms: 5000,
            retries: 2,
        }
    }
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    probs: Vec<f64>,
}

/// Blocking client for `POST /classify`.
///
/// Uses a blocking HTTP client; call it from a blocking context when inside an
/// async runtime.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    config: ClassifierEndpointConfig,
    client: reqwest::blocking::Client,
}

impl RemoteClassifier {
    pub fn new(config: ClassifierEndpointConfig) -> Result<Self, S2epaError> {
        if config.timeout_ms == 0 {
            return Err(S2epaError::Config("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| S2epaError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &ClassifierEndpointConfig {
        &self.config
    }

    fn attempt(&self, url: &str, text: &str) -> Result<Vec<f64>, S2epaError> {
        let resp = self
            .client
            .post(url)
            .json(&ClassifyRequest { text })
            .send()
            .map_err(|e| S2epaError::Unavailable(e.to_string()))?;
        let status = resp.status();
        if status != reqwest::StatusCode::OK {
            return Err(S2epaError::Unavailable(format!("status {status}")));
        }
        let body = resp
            .bytes()
            .map_err(|e| S2epaError::Unavailable(e.to_string()))?;
        let parsed: ClassifyResponse = serde_json::from_slice(&body)
            .map_err(|e| S2epaError::Protocol(format!("bad payload: {e}")))?;
        Ok(parsed.probs)
    }

    pub fn classify<T: Scalar>(&self, text: &str) -> Result<EmojiDistribution<T>, S2epaError> {
        if text.trim().is_empty() {
            return Err(S2epaError::Input("empty text".into()));
        }
        let url = format!("{}/classify", self.config.base_url.trim_end_matches('/'));
        let mut last = None;
        for _ in 0..=self.config.retries {
            match self.attempt(&url, text) {
                Ok(probs) => return Self::validate(probs),
                Err(e @ S2epaError::Unavailable(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn validate<T: Scalar>(probs: Vec<f64>) -> Result<EmojiDistribution<T>, S2epaError> {
        if probs.len() != EMOJI_COUNT {
            return Err(S2epaError::Protocol(format!(
                "expected {EMOJI_COUNT} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(S2epaError::Protocol(
                "negative or non-finite probability".into(),
            ));
        }
        EmojiDistribution::renormalized(
            probs.into_iter().map(T::lit).collect(),
            T::lit(RENORMALIZE_TOL),
        )
        .map_err(|e| S2epaError::Protocol(e.to_string()))
    }
}
