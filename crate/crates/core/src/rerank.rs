//! Candidate scoring and selection.
//!
//! Each candidate x̃ for a source x is scored by
//! `ln sim(x, x̃) + ln p(s2 | x̃) [+ ln p(x̃)]` and the highest composite
//! wins, ties going to the lowest index. Every probability factor is
//! floored at [`PROB_FLOOR`] before taking logs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendEndpoints, BackendError, Backends, MaskFillResponse};
use crate::par::par_map;
use crate::prompt::{render_cloze, PromptError, StyleLabel, TransferRequest};

pub const PROB_FLOOR: f64 = 1e-9;

fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RerankError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("invalid rerank configuration: {0}")]
    InvalidConfig(String),
    #[error("source and target styles share the label `{0}`")]
    SameStyle(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// One extracted rewrite in the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub text: String,
    pub gen_score: f64,
    pub unterminated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthSource {
    /// Cloze query against the masked LM.
    #[default]
    MlmCloze,
    /// Direct query against a style classifier.
    ExternalClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankConfig {
    pub k: u32,
    pub use_fluency: bool,
    pub strength_source: StrengthSource,
    pub endpoints: BackendEndpoints,
    /// Upper bound on candidates scored concurrently.
    pub max_in_flight: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            k: 3,
            use_fluency: true,
            strength_source: StrengthSource::MlmCloze,
            endpoints: BackendEndpoints::default(),
            max_in_flight: 4,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<(), RerankError> {
        if self.k == 0 {
            return Err(RerankError::InvalidConfig("k must be >= 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(RerankError::InvalidConfig("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

/// Log-factors of one candidate. `log_fluency` is absent when fluency is
/// disabled, and `composite` is the sum of the present terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankScore {
    pub log_similarity: f64,
    pub log_strength: f64,
    pub log_fluency: Option<f64>,
    pub composite: f64,
}

impl RerankScore {
    pub fn new(log_similarity: f64, log_strength: f64, log_fluency: Option<f64>) -> Self {
        Self {
            log_similarity,
            log_strength,
            log_fluency,
            composite: log_similarity + log_strength + log_fluency.unwrap_or(0.0),
        }
    }
}

/// Audit record for one example's selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRecord {
    pub candidates: Vec<Candidate>,
    pub scores: Vec<RerankScore>,
    pub winner_index: usize,
    pub baseline_index: usize,
}

impl RerankRecord {
    pub fn winner(&self) -> &Candidate {
        &self.candidates[self.winner_index]
    }

    pub fn baseline(&self) -> &Candidate {
        &self.candidates[self.baseline_index]
    }
}

fn argmax_first(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Position of the highest composite; ties go to the lowest position.
pub fn select_winner(scores: &[RerankScore]) -> Result<usize, RerankError> {
    argmax_first(scores.iter().map(|s| s.composite)).ok_or(RerankError::EmptyPool)
}

/// The candidate with the highest generator score, ties to the lowest index.
pub fn top_beam_baseline(pool: &[Candidate]) -> Result<&Candidate, RerankError> {
    argmax_first(pool.iter().map(|c| c.gen_score))
        .map(|i| &pool[i])
        .ok_or(RerankError::EmptyPool)
}

/// `raw_target / (raw_source + raw_target)`, or 0.5 when both are zero.
pub fn l1_strength(raw_source: f64, raw_target: f64) -> f64 {
    let total = raw_source + raw_target;
    if total > 0.0 {
        raw_target / total
    } else {
        0.5
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn mean_best_match(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|u| to.iter().map(|v| cosine(u, v)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    total / from.len() as f64
}

/// Greedy-matching F1 between two sets of token vectors, without IDF
/// weighting or baseline rescaling, clamped to `[PROB_FLOOR, 1]`.
///
/// Recall matches each reference token to its most similar candidate token,
/// precision does the reverse, and F1 is their harmonic mean.
pub fn greedy_match_f1(reference: &[Vec<f64>], candidate: &[Vec<f64>]) -> f64 {
    if reference.is_empty() || candidate.is_empty() {
        return PROB_FLOOR;
    }
    let recall = mean_best_match(reference, candidate);
    let precision = mean_best_match(candidate, reference);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    f1.clamp(PROB_FLOOR, 1.0)
}

/// Scores candidates against one set of connected backends.
#[derive(Debug, Clone)]
pub struct Reranker {
    cfg: RerankConfig,
    backends: Backends,
}

impl Reranker {
    pub fn connect(cfg: RerankConfig) -> Result<Self, RerankError> {
        let backends = Backends::connect(&cfg.endpoints)?;
        Self::with_backends(cfg, backends)
    }

    pub fn with_backends(cfg: RerankConfig, backends: Backends) -> Result<Self, RerankError> {
        cfg.validate()?;
        Ok(Self { cfg, backends })
    }

    pub fn config(&self) -> &RerankConfig {
        &self.cfg
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    /// Token-embedding similarity of `src` and `cand`, in `(0, 1]`.
    /// Identical texts score exactly 1.
    pub fn similarity_score(&self, src: &str, cand: &str) -> Result<f64, RerankError> {
        if src.trim().is_empty() || cand.trim().is_empty() {
            return Err(BackendError::Precondition("similarity needs two non-empty texts".into()).into());
        }
        if src == cand {
            return Ok(1.0);
        }
        let embedder = self.backends.embedder()?;
        let a = embedder.embed_tokens(src)?;
        let b = embedder.embed_tokens(cand)?;
        Ok(greedy_match_f1(&a.vectors, &b.vectors))
    }

    fn strength_scores(&self, cand: &str, labels: &[String]) -> Result<MaskFillResponse, RerankError> {
        Ok(match self.cfg.strength_source {
            StrengthSource::MlmCloze => {
                let mlm = self.backends.mask_filler()?;
                let cloze = render_cloze(cand, mlm.mask_token())?;
                mlm.fill_mask(&cloze, labels)?
            }
            StrengthSource::ExternalClassifier => self.backends.classifier()?.classify(cand, labels)?,
        })
    }

    /// Probability that `cand` carries `target` rather than `source`, from
    /// the l1-normalized likelihoods of the two style words.
    pub fn style_strength(
        &self,
        cand: &str,
        source: &StyleLabel,
        target: &StyleLabel,
    ) -> Result<f64, RerankError> {
        if source.name() == target.name() {
            return Err(RerankError::SameStyle(source.name().to_string()));
        }
        let labels = [source.name().to_string(), target.name().to_string()];
        let scores = self.strength_scores(cand, &labels)?;
        Ok(l1_strength(scores.get(&labels[0]), scores.get(&labels[1])))
    }

    /// `ln p(cand)` as the sum of per-token log-probabilities, each floored
    /// at `ln PROB_FLOOR`.
    pub fn fluency_logprob(&self, cand: &str) -> Result<f64, RerankError> {
        let resp = self.backends.scorer()?.score_tokens(cand)?;
        Ok(resp.tokens.iter().map(|t| t.logprob.max(PROB_FLOOR.ln())).sum())
    }

    pub fn score_candidate(&self, req: &TransferRequest, cand: &str) -> Result<RerankScore, RerankError> {
        let sim = self.similarity_score(&req.input_text, cand)?;
        let strength = self.style_strength(cand, &req.source_style, &req.target_style)?;
        let fluency = if self.cfg.use_fluency {
            Some(self.fluency_logprob(cand)?)
        } else {
            None
        };
        Ok(RerankScore::new(floored_ln(sim), floored_ln(strength), fluency))
    }

    /// Scores every candidate (concurrently, up to `max_in_flight`) and
    /// picks the winner. The scores are parallel to `pool`.
    pub fn rerank(&self, req: &TransferRequest, pool: &[Candidate]) -> Result<RerankRecord, RerankError> {
        if pool.is_empty() {
            return Err(RerankError::EmptyPool);
        }
        let scores = par_map(pool, self.cfg.max_in_flight, |_, c| self.score_candidate(req, &c.text))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let winner_index = select_winner(&scores)?;
        let baseline = top_beam_baseline(pool)?;
        let baseline_index = pool.iter().position(|c| std::ptr::eq(c, baseline)).unwrap_or(0);
        Ok(RerankRecord {
            candidates: pool.to_vec(),
            scores,
            winner_index,
            baseline_index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{HashEmbedder, SentimentMock, TableEmbedder, UniformScorer};
    use crate::prompt::{delimiter_by_name, TemplateKind};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn cand(i: usize, text: &str, gen_score: f64) -> Candidate {
        Candidate {
            index: i,
            text: text.into(),
            gen_score,
            unterminated: false,
        }
    }

    fn mock_backends() -> Backends {
        Backends {
            scorer: Some(Arc::new(UniformScorer::default())),
            mask_filler: Some(Arc::new(SentimentMock::default())),
            embedder: Some(Arc::new(HashEmbedder::default())),
            classifier: Some(Arc::new(SentimentMock::default())),
            ..Backends::default()
        }
    }

    fn request(text: &str) -> TransferRequest {
        TransferRequest::new(
            text,
            "positive".parse().unwrap(),
            "negative".parse().unwrap(),
            TemplateKind::Contrastive,
            delimiter_by_name("curly").unwrap(),
        )
    }

    #[test]
    fn winner_is_argmax() {
        let s: Vec<_> = [-2.0, -1.0, -5.0].iter().map(|&c| RerankScore::new(c, 0.0, None)).collect();
        assert_eq!(select_winner(&s).unwrap(), 1);
        let tied = vec![RerankScore::new(-1.0, 0.0, None); 3];
        assert_eq!(select_winner(&tied).unwrap(), 0);
        assert!(select_winner(&[]).is_err());
    }

    #[test]
    fn baseline_cases() {
        let pool = [cand(0, "a", -1.2), cand(1, "b", -0.7), cand(2, "c", -3.0)];
        assert_eq!(top_beam_baseline(&pool).unwrap().index, 1);
        let flat = [cand(0, "a", -1.0), cand(1, "b", -1.0)];
        assert_eq!(top_beam_baseline(&flat).unwrap().index, 0);
        assert_eq!(top_beam_baseline(&pool[2..]).unwrap().index, 2);
        assert!(top_beam_baseline(&[]).is_err());
    }

    #[test]
    fn l1_rules() {
        assert_relative_eq!(l1_strength(0.1, 0.3), 0.75, epsilon = 1e-12);
        assert_eq!(l1_strength(0.0, 0.0), 0.5);
        assert_relative_eq!(l1_strength(0.2, 0.6) + l1_strength(0.6, 0.2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn greedy_f1_by_hand() {
        // reference [e1, e2], candidate [e1, e3]; e3 orthogonal to e1, cos(e2,e3)=0.6
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0];
        let e3 = vec![0.0, 0.6, 0.8];
        let r = (1.0 + 0.6) / 2.0;
        let p = (1.0 + 0.6) / 2.0;
        let f1 = greedy_match_f1(&[e1.clone(), e2], &[e1, e3]);
        assert_relative_eq!(f1, 2.0 * p * r / (p + r), epsilon = 1e-12);
    }

    #[test]
    fn similarity_identity_and_symmetry() {
        let rr = Reranker::with_backends(RerankConfig::default(), mock_backends()).unwrap();
        assert_eq!(rr.similarity_score("the food was good", "the food was good").unwrap(), 1.0);
        let a = rr.similarity_score("the food was good", "service was bad").unwrap();
        let b = rr.similarity_score("service was bad", "the food was good").unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
        assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn similarity_orthogonal_tokens() {
        let table = TableEmbedder::new([
            ("x", vec![1.0, 0.0]),
            ("y", vec![0.0, 1.0]),
        ])
        .unwrap();
        let backends = Backends {
            embedder: Some(Arc::new(table)),
            ..Backends::default()
        };
        let rr = Reranker::with_backends(RerankConfig::default(), backends).unwrap();
        assert_eq!(rr.similarity_score("x", "y").unwrap(), PROB_FLOOR);
        assert_relative_eq!(rr.similarity_score("x y", "x").unwrap(), 2.0 * 0.5 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn strength_from_sentiment_mock() {
        let rr = Reranker::with_backends(RerankConfig::default(), mock_backends()).unwrap();
        let pos: StyleLabel = "positive".parse().unwrap();
        let neg: StyleLabel = "negative".parse().unwrap();
        let s = rr.style_strength("the food was bad", &pos, &neg).unwrap();
        assert!(s > 0.5);
        let t = rr.style_strength("the food was bad", &neg, &pos).unwrap();
        assert_relative_eq!(s + t, 1.0, epsilon = 1e-12);
        assert!(matches!(rr.style_strength("x", &pos, &pos), Err(RerankError::SameStyle(_))));
    }

    #[test]
    fn fluency_under_uniform() {
        let rr = Reranker::with_backends(RerankConfig::default(), mock_backends()).unwrap();
        let v = rr.fluency_logprob("a b c d").unwrap();
        assert_relative_eq!(v, -4.0 * (50257f64).ln(), epsilon = 1e-9);
        assert!(rr.fluency_logprob("a b c d e").unwrap() < v);
    }

    #[test]
    fn flipped_beats_copy() {
        let rr = Reranker::with_backends(RerankConfig::default(), mock_backends()).unwrap();
        let req = request("the food was good");
        let pool = [cand(0, "the food was good", -0.1), cand(1, "the food was bad", -0.2)];
        let rec = rr.rerank(&req, &pool).unwrap();
        assert_eq!(rec.winner_index, 1);
        assert_eq!(rec.baseline_index, 0);
        assert_eq!(rec.scores.len(), 2);
        assert_relative_eq!(rec.scores[0].log_similarity, 0.0);
        assert_relative_eq!(rec.scores[0].log_strength, (0.1f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn no_fluency_skips_scorer() {
        let mut backends = mock_backends();
        backends.scorer = None;
        let cfg = RerankConfig {
            use_fluency: false,
            ..RerankConfig::default()
        };
        let rr = Reranker::with_backends(cfg, backends).unwrap();
        let rec = rr.rerank(&request("good"), &[cand(0, "bad", 0.0)]).unwrap();
        assert_eq!(rec.scores[0].log_fluency, None);
        assert_eq!(rec.scores[0].composite, rec.scores[0].log_similarity + rec.scores[0].log_strength);
    }

    #[test]
    fn external_classifier_source() {
        let mut backends = mock_backends();
        backends.mask_filler = None;
        let cfg = RerankConfig {
            strength_source: StrengthSource::ExternalClassifier,
            ..RerankConfig::default()
        };
        let rr = Reranker::with_backends(cfg, backends).unwrap();
        let pos: StyleLabel = "positive".parse().unwrap();
        let neg: StyleLabel = "negative".parse().unwrap();
        assert_relative_eq!(rr.style_strength("bad", &pos, &neg).unwrap(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn k_zero_rejected() {
        let cfg = RerankConfig {
            k: 0,
            ..RerankConfig::default()
        };
        assert!(Reranker::with_backends(cfg, Backends::default()).is_err());
    }
}
