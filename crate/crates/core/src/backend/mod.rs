//! Wire contract for the external model services, an HTTP client for it,
//! and deterministic in-process mocks.
//!
//! Four services are involved in a run: a generator (`/complete`), a
//! token scorer (`/score`), a masked-LM filler (`/fill_mask`) and a token
//! embedder (`/embed`). An optional style classifier speaks the same shape
//! as `/fill_mask` without requiring a mask token.

mod http;
pub mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpBackend;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure talking to {url} after {attempts} attempt(s): {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("service at {url} reported an error (status {status}): {message}")]
    Service {
        url: String,
        status: u16,
        message: String,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("label(s) not in backend vocabulary: {}", .labels.join(", "))]
    LabelNotInVocabulary { labels: Vec<String> },
    #[error("label not single-token: {}", .labels.join(", "))]
    LabelNotSingleToken { labels: Vec<String> },
    #[error("no {0} backend configured")]
    NotConfigured(&'static str),
    #[error("invalid endpoint `{0}`")]
    InvalidEndpoint(String),
}

impl BackendError {
    /// Transport failures are the only class worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Beam,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub mode: DecodeMode,
    pub beam_width: Option<u32>,
    pub temperature: Option<f64>,
}

impl DecodeParams {
    pub fn beam(width: u32) -> Self {
        Self {
            mode: DecodeMode::Beam,
            beam_width: Some(width),
            temperature: None,
        }
    }

    pub fn sample(temperature: f64) -> Self {
        Self {
            mode: DecodeMode::Sample,
            beam_width: None,
            temperature: Some(temperature),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub num_candidates: u32,
    pub stop: Option<String>,
    pub seed: Option<u64>,
    pub decode: DecodeParams,
}

impl CompletionRequest {
    /// Beam search with width `k` and no stop sequence.
    pub fn new(prompt: impl Into<String>, k: u32) -> Self {
        Self {
            prompt: prompt.into(),
            max_new_tokens: 64,
            num_candidates: k,
            stop: None,
            seed: None,
            decode: DecodeParams::beam(k),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.num_candidates == 0 {
            return Err(BackendError::Precondition("num_candidates must be >= 1".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(BackendError::Precondition("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

/// One raw continuation and its length-normalized log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedText {
    pub text: String,
    pub gen_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub candidates: Vec<GeneratedText>,
}

impl CompletionResponse {
    pub fn validate(&self) -> Result<(), String> {
        if self.candidates.is_empty() {
            return Err("no candidates".into());
        }
        if self.candidates.iter().any(|c| !c.gen_score.is_finite()) {
            return Err("non-finite gen_score".into());
        }
        if self
            .candidates
            .windows(2)
            .any(|w| w[0].gen_score < w[1].gen_score)
        {
            return Err("candidates not ordered by gen_score".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScoreResponse {
    pub tokens: Vec<TokenLogprob>,
}

impl TokenScoreResponse {
    pub fn validate(&self) -> Result<(), String> {
        match self
            .tokens
            .iter()
            .find(|t| !t.logprob.is_finite() || t.logprob > 0.0)
        {
            Some(t) => Err(format!("bad logprob {} for token `{}`", t.logprob, t.token)),
            None => Ok(()),
        }
    }

    pub fn total_logprob(&self) -> f64 {
        self.tokens.iter().map(|t| t.logprob).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFillResponse {
    pub scores: BTreeMap<String, f64>,
}

impl MaskFillResponse {
    pub fn validate(&self, labels: &[String]) -> Result<(), String> {
        if self.scores.len() != labels.len() || labels.iter().any(|l| !self.scores.contains_key(l)) {
            return Err(format!(
                "expected scores for exactly {:?}, got {:?}",
                labels,
                self.scores.keys().collect::<Vec<_>>()
            ));
        }
        if self.scores.values().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("likelihoods must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn get(&self, label: &str) -> f64 {
        self.scores.get(label).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingResponse {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(format!("vector {i} has length {}, expected {}", v.len(), self.dim));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(format!("vector {i} is not finite"));
            }
            if v.iter().all(|x| *x == 0.0) {
                return Err(format!("vector {i} is all zeros"));
            }
        }
        Ok(())
    }
}

pub trait Generator: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

pub trait TokenScorer: Send + Sync {
    fn score_tokens(&self, text: &str) -> Result<TokenScoreResponse, BackendError>;
}

pub trait MaskFiller: Send + Sync {
    fn mask_token(&self) -> &str;
    fn fill_mask(&self, cloze: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError>;
}

/// A style classifier with the `/fill_mask` response shape.
pub trait Classifier: Send + Sync {
    fn classify(&self, text: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError>;
}

pub trait Embedder: Send + Sync {
    fn embed_tokens(&self, text: &str) -> Result<EmbeddingResponse, BackendError>;
}

pub(crate) fn check_labels(labels: &[String]) -> Result<(), BackendError> {
    let mut distinct: Vec<&String> = labels.iter().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 || distinct.len() != labels.len() {
        return Err(BackendError::Precondition(
            "labels must hold at least two distinct entries".into(),
        ));
    }
    Ok(())
}

pub(crate) fn check_mask(cloze: &str, mask: &str) -> Result<(), BackendError> {
    let n = cloze.matches(mask).count();
    if n != 1 {
        return Err(BackendError::Precondition(format!(
            "cloze must contain exactly one `{mask}`, found {n}"
        )));
    }
    Ok(())
}

pub(crate) fn check_text(text: &str) -> Result<(), BackendError> {
    if text.trim().is_empty() {
        return Err(BackendError::Precondition("text must not be empty".into()));
    }
    Ok(())
}

/// Addresses and transport settings for the model services.
///
/// Each address is either an `http(s)://` URL of the full endpoint (for
/// example `http://localhost:8000/complete`) or a `mock:<name>` spec naming
/// one of the in-process mocks; see [`mock::from_spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoints {
    pub complete: Option<String>,
    pub score: Option<String>,
    pub fill_mask: Option<String>,
    pub embed: Option<String>,
    pub classifier: Option<String>,
    pub mask_token: String,
    pub timeout_secs: f64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for BackendEndpoints {
    fn default() -> Self {
        Self {
            complete: None,
            score: None,
            fill_mask: None,
            embed: None,
            classifier: None,
            mask_token: crate::prompt::CLOZE_MASK_DEFAULT.to_string(),
            timeout_secs: 60.0,
            max_attempts: 3,
            backoff_ms: 250,
        }
    }
}

pub const ENV_BASE_URL: &str = "PNR_BASE_URL";
pub const ENV_COMPLETE_URL: &str = "PNR_COMPLETE_URL";
pub const ENV_SCORE_URL: &str = "PNR_SCORE_URL";
pub const ENV_FILL_MASK_URL: &str = "PNR_FILL_MASK_URL";
pub const ENV_EMBED_URL: &str = "PNR_EMBED_URL";
pub const ENV_CLASSIFIER_URL: &str = "PNR_CLASSIFIER_URL";
pub const ENV_MASK_TOKEN: &str = "PNR_MASK_TOKEN";
pub const ENV_TIMEOUT_SECS: &str = "PNR_TIMEOUT_SECS";

impl BackendEndpoints {
    /// Every service pointed at one server, at `/complete`, `/score`,
    /// `/fill_mask` and `/embed`.
    pub fn with_base_url(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        Self {
            complete: Some(format!("{base}/complete")),
            score: Some(format!("{base}/score")),
            fill_mask: Some(format!("{base}/fill_mask")),
            embed: Some(format!("{base}/embed")),
            ..Self::default()
        }
    }

    /// The default mock set: lexicon generator, uniform scorer, sentiment
    /// masked LM and classifier, hashed embeddings.
    pub fn mocks() -> Self {
        Self {
            complete: Some("mock:lexicon".into()),
            score: Some("mock:uniform".into()),
            fill_mask: Some("mock:sentiment".into()),
            embed: Some("mock:hash".into()),
            classifier: Some("mock:sentiment".into()),
            ..Self::default()
        }
    }

    /// Reads the `PNR_*` variables; unset ones keep `self`'s values.
    pub fn overlay_env(mut self) -> Result<Self, BackendError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        if let Some(base) = var(ENV_BASE_URL) {
            let b = Self::with_base_url(&base);
            self.complete = b.complete;
            self.score = b.score;
            self.fill_mask = b.fill_mask;
            self.embed = b.embed;
        }
        for (key, slot) in [
            (ENV_COMPLETE_URL, &mut self.complete),
            (ENV_SCORE_URL, &mut self.score),
            (ENV_FILL_MASK_URL, &mut self.fill_mask),
            (ENV_EMBED_URL, &mut self.embed),
            (ENV_CLASSIFIER_URL, &mut self.classifier),
        ] {
            if let Some(v) = var(key) {
                *slot = Some(v);
            }
        }
        if let Some(m) = var(ENV_MASK_TOKEN) {
            self.mask_token = m;
        }
        if let Some(t) = var(ENV_TIMEOUT_SECS) {
            self.timeout_secs = t
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite() && *x > 0.0)
                .ok_or_else(|| BackendError::InvalidEndpoint(format!("{ENV_TIMEOUT_SECS}={t}")))?;
        }
        Ok(self)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Connected service handles. Cloning is cheap; handles are shared.
#[derive(Clone, Default)]
pub struct Backends {
    pub generator: Option<Arc<dyn Generator>>,
    pub scorer: Option<Arc<dyn TokenScorer>>,
    pub mask_filler: Option<Arc<dyn MaskFiller>>,
    pub embedder: Option<Arc<dyn Embedder>>,
    pub classifier: Option<Arc<dyn Classifier>>,
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends")
            .field("generator", &self.generator.is_some())
            .field("scorer", &self.scorer.is_some())
            .field("mask_filler", &self.mask_filler.is_some())
            .field("embedder", &self.embedder.is_some())
            .field("classifier", &self.classifier.is_some())
            .finish()
    }
}

impl Backends {
    pub fn connect(endpoints: &BackendEndpoints) -> Result<Self, BackendError> {
        let http = HttpBackend::new(endpoints);
        let mut out = Backends::default();

        if let Some(addr) = &endpoints.complete {
            out.generator = Some(match mock::from_spec(addr, endpoints)? {
                Some(m) => m.generator()?,
                None => Arc::new(http.at(addr)?),
            });
        }
        if let Some(addr) = &endpoints.score {
            out.scorer = Some(match mock::from_spec(addr, endpoints)? {
                Some(m) => m.scorer()?,
                None => Arc::new(http.at(addr)?),
            });
        }
        if let Some(addr) = &endpoints.fill_mask {
            out.mask_filler = Some(match mock::from_spec(addr, endpoints)? {
                Some(m) => m.mask_filler()?,
                None => Arc::new(http.at(addr)?),
            });
        }
        if let Some(addr) = &endpoints.embed {
            out.embedder = Some(match mock::from_spec(addr, endpoints)? {
                Some(m) => m.embedder()?,
                None => Arc::new(http.at(addr)?),
            });
        }
        if let Some(addr) = &endpoints.classifier {
            out.classifier = Some(match mock::from_spec(addr, endpoints)? {
                Some(m) => m.classifier()?,
                None => Arc::new(http.at(addr)?),
            });
        }
        Ok(out)
    }

    pub fn generator(&self) -> Result<&dyn Generator, BackendError> {
        self.generator.as_deref().ok_or(BackendError::NotConfigured("completion"))
    }

    pub fn scorer(&self) -> Result<&dyn TokenScorer, BackendError> {
        self.scorer.as_deref().ok_or(BackendError::NotConfigured("token scoring"))
    }

    pub fn mask_filler(&self) -> Result<&dyn MaskFiller, BackendError> {
        self.mask_filler.as_deref().ok_or(BackendError::NotConfigured("mask filling"))
    }

    pub fn embedder(&self) -> Result<&dyn Embedder, BackendError> {
        self.embedder.as_deref().ok_or(BackendError::NotConfigured("embedding"))
    }

    pub fn classifier(&self) -> Result<&dyn Classifier, BackendError> {
        self.classifier.as_deref().ok_or(BackendError::NotConfigured("classifier"))
    }
}
