use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{
    check_labels, check_mask, check_text, BackendEndpoints, BackendError, Classifier,
    CompletionRequest, CompletionResponse, Embedder, EmbeddingResponse, Generator, MaskFiller,
    MaskFillResponse, TokenScoreResponse, TokenScorer,
};

/// JSON-over-HTTP client for one service endpoint.
///
/// Transport failures are retried with exponential backoff up to
/// `max_attempts`; malformed bodies and service-reported errors are not.
#[derive(Clone)]
pub struct HttpBackend {
    agent: Agent,
    url: String,
    mask_token: String,
    max_attempts: u32,
    backoff: Duration,
}

#[derive(Serialize)]
struct TextBody<'a> {
    text: &'a str,
}

#[derive(Serialize)]
struct LabelledBody<'a> {
    text: &'a str,
    labels: &'a [String],
}

/// Error body a service may return with a non-2xx status.
#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default)]
    code: Option<String>,
    #[serde(default)]
    labels: Vec<String>,
}

impl HttpBackend {
    pub fn new(endpoints: &BackendEndpoints) -> Self {
        let config = Agent::config_builder()
            .timeout_global(Some(endpoints.timeout()))
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
            url: String::new(),
            mask_token: endpoints.mask_token.clone(),
            max_attempts: endpoints.max_attempts.max(1),
            backoff: Duration::from_millis(endpoints.backoff_ms),
        }
    }

    /// The same client aimed at another endpoint URL.
    pub fn at(&self, url: &str) -> Result<Self, BackendError> {
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(BackendError::InvalidEndpoint(url.to_string()));
        }
        Ok(Self {
            url: url.to_string(),
            ..self.clone()
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, BackendError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.post_once(body, attempt) {
                Err(e) if e.is_transient() && attempt < self.max_attempts => {
                    let wait = self.backoff * 2u32.pow(attempt - 1);
                    warn!("{e}; retrying in {wait:?}");
                    thread::sleep(wait);
                }
                other => return other,
            }
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(
        &self,
        body: &B,
        attempt: u32,
    ) -> Result<R, BackendError> {
        let transport = |message: String| BackendError::Transport {
            url: self.url.clone(),
            attempts: attempt,
            message,
        };
        debug!("POST {} (attempt {attempt})", self.url);
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::BadUri(u) => BackendError::InvalidEndpoint(u),
                other => transport(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| transport(e.to_string()))?;

        if !(200..300).contains(&status) {
            return Err(self.service_error(status, &text));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Malformed {
            url: self.url.clone(),
            message: e.to_string(),
        })
    }

    fn service_error(&self, status: u16, text: &str) -> BackendError {
        match serde_json::from_str::<ErrorBody>(text) {
            Ok(body) => match body.code.as_deref() {
                Some("label_not_in_vocabulary") => {
                    BackendError::LabelNotInVocabulary { labels: body.labels }
                }
                Some("label_not_single_token") => {
                    BackendError::LabelNotSingleToken { labels: body.labels }
                }
                Some("precondition") => BackendError::Precondition(body.error),
                _ => BackendError::Service {
                    url: self.url.clone(),
                    status,
                    message: body.error,
                },
            },
            Err(_) => BackendError::Service {
                url: self.url.clone(),
                status,
                message: text.chars().take(200).collect(),
            },
        }
    }

    fn malformed(&self, message: String) -> BackendError {
        BackendError::Malformed {
            url: self.url.clone(),
            message,
        }
    }
}

impl Generator for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let resp: CompletionResponse = self.post(req)?;
        resp.validate().map_err(|m| self.malformed(m))?;
        Ok(resp)
    }
}

impl TokenScorer for HttpBackend {
    fn score_tokens(&self, text: &str) -> Result<TokenScoreResponse, BackendError> {
        check_text(text)?;
        let resp: TokenScoreResponse = self.post(&TextBody { text })?;
        resp.validate().map_err(|m| self.malformed(m))?;
        if resp.tokens.is_empty() {
            return Err(self.malformed("no tokens scored".into()));
        }
        Ok(resp)
    }
}

impl MaskFiller for HttpBackend {
    fn mask_token(&self) -> &str {
        &self.mask_token
    }

    fn fill_mask(&self, cloze: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_mask(cloze, &self.mask_token)?;
        check_labels(labels)?;
        let resp: MaskFillResponse = self.post(&LabelledBody { text: cloze, labels })?;
        resp.validate(labels).map_err(|m| self.malformed(m))?;
        Ok(resp)
    }
}

impl Classifier for HttpBackend {
    fn classify(&self, text: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_text(text)?;
        check_labels(labels)?;
        let resp: MaskFillResponse = self.post(&LabelledBody { text, labels })?;
        resp.validate(labels).map_err(|m| self.malformed(m))?;
        Ok(resp)
    }
}

impl Embedder for HttpBackend {
    fn embed_tokens(&self, text: &str) -> Result<EmbeddingResponse, BackendError> {
        check_text(text)?;
        let resp: EmbeddingResponse = self.post(&TextBody { text })?;
        resp.validate().map_err(|m| self.malformed(m))?;
        if resp.vectors.is_empty() {
            return Err(self.malformed("no vectors returned".into()));
        }
        Ok(resp)
    }
}
