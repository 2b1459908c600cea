//! Automatic evaluation: corpus BLEU against sources and references,
//! sentence GLEU, token-level perplexity, classifier accuracy and exact
//! match.

mod bleu;
mod gleu;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{corpus_bleu, ref_sbleu, self_sbleu, BleuReport, MAX_ORDER};
pub use gleu::sentence_gleu;
pub use tokenize::tokenize_eval;

use crate::backend::{BackendError, Classifier, TokenScorer};
use crate::par::par_map;
use crate::prompt::StyleLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right} items")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{0} text is empty")]
    EmptyText(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn check_parallel(left: usize, right: usize) -> Result<(), MetricError> {
    if left != right {
        return Err(MetricError::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}

/// Fraction of pairs that are byte-equal after trimming surrounding
/// whitespace.
pub fn exact_match_accuracy<A: AsRef<str>, B: AsRef<str>>(
    outputs: &[A],
    references: &[B],
) -> Result<f64, MetricError> {
    check_parallel(outputs.len(), references.len())?;
    let hits = outputs
        .iter()
        .zip(references)
        .filter(|(a, b)| a.as_ref().trim() == b.as_ref().trim())
        .count();
    Ok(hits as f64 / outputs.len() as f64)
}

/// `exp(-total_logprob / token_count)`.
pub fn perplexity_from_totals(total_logprob: f64, token_count: usize) -> Result<f64, MetricError> {
    if token_count == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok((-total_logprob / token_count as f64).exp())
}

/// Token-weighted corpus perplexity: every scored token counts once,
/// whatever sentence it came from. Blank texts carry no tokens and are
/// skipped.
pub fn corpus_perplexity<S: AsRef<str> + Sync>(
    texts: &[S],
    scorer: &dyn TokenScorer,
    max_in_flight: usize,
) -> Result<f64, MetricError> {
    if texts.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let per_text = par_map(texts, max_in_flight, |_, t| {
        let t = t.as_ref();
        if t.trim().is_empty() {
            return Ok((0.0, 0));
        }
        let resp = scorer.score_tokens(t)?;
        Ok::<_, BackendError>((resp.total_logprob(), resp.tokens.len()))
    });
    let (mut total, mut count) = (0.0, 0);
    for r in per_text {
        let (lp, n) = r?;
        total += lp;
        count += n;
    }
    perplexity_from_totals(total, count)
}

/// Label with the largest score; ties go to the earliest label.
pub fn argmax_label<'l>(
    scores: &crate::backend::MaskFillResponse,
    labels: &'l [String],
) -> Option<&'l String> {
    let mut best: Option<(&String, f64)> = None;
    for l in labels {
        let s = scores.get(l);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((l, s));
        }
    }
    best.map(|(l, _)| l)
}

fn style_matches(predicted: &str, target: &StyleLabel) -> bool {
    (predicted == target.name()) != target.is_negated()
}

/// Fraction of outputs whose highest-scoring label is the target style
/// (or, for a negated target, anything but the named style). Blank
/// outputs count as misses.
pub fn classifier_accuracy<S: AsRef<str> + Sync>(
    outputs: &[S],
    targets: &[StyleLabel],
    labels: &[String],
    classifier: &dyn Classifier,
    max_in_flight: usize,
) -> Result<f64, MetricError> {
    check_parallel(outputs.len(), targets.len())?;
    let verdicts = par_map(outputs, max_in_flight, |i, out| {
        let out = out.as_ref();
        if out.trim().is_empty() {
            return Ok(false);
        }
        let scores = classifier.classify(out, labels)?;
        Ok::<_, BackendError>(
            argmax_label(&scores, labels).is_some_and(|p| style_matches(p, &targets[i])),
        )
    });
    let mut hits = 0;
    for v in verdicts {
        hits += usize::from(v?);
    }
    Ok(hits as f64 / outputs.len() as f64)
}

/// Mean sentence GLEU over a corpus, in `[0, 1]`.
pub fn mean_sentence_gleu<A, B, C>(sources: &[A], outputs: &[B], references: &[C]) -> Result<f64, MetricError>
where
    A: AsRef<str>,
    B: AsRef<str>,
    C: AsRef<str>,
{
    check_parallel(sources.len(), outputs.len())?;
    check_parallel(sources.len(), references.len())?;
    let mut total = 0.0;
    for ((s, h), r) in sources.iter().zip(outputs).zip(references) {
        total += if h.as_ref().trim().is_empty() {
            0.0
        } else {
            sentence_gleu(s.as_ref(), h.as_ref(), r.as_ref())?
        };
    }
    Ok(total / sources.len() as f64)
}

/// The metrics computed for one run. BLEU values are on the 0-100 scale;
/// accuracy, GLEU and exact match are fractions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub r_sbleu: Option<f64>,
    pub s_sbleu: Option<f64>,
    pub accuracy: Option<f64>,
    pub ppl: Option<f64>,
    pub gleu: Option<f64>,
    pub exact_match: Option<f64>,
}

impl EvalSummary {
    pub fn validate(&self) -> Result<(), String> {
        let check = |name: &str, v: Option<f64>, lo: f64, hi: f64| match v {
            Some(x) if !(x.is_finite() && x >= lo && x <= hi) => {
                Err(format!("{name} = {x} outside [{lo}, {hi}]"))
            }
            _ => Ok(()),
        };
        check("r_sbleu", self.r_sbleu, 0.0, 100.0)?;
        check("s_sbleu", self.s_sbleu, 0.0, 100.0)?;
        check("accuracy", self.accuracy, 0.0, 1.0)?;
        check("gleu", self.gleu, 0.0, 1.0)?;
        check("exact_match", self.exact_match, 0.0, 1.0)?;
        match self.ppl {
            Some(p) if !(p.is_finite() && p > 0.0) => Err(format!("ppl = {p} is not positive")),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{SentimentMock, UniformScorer};
    use crate::backend::{TokenLogprob, TokenScoreResponse};
    use approx::assert_relative_eq;

    #[test]
    fn exact_match_cases() {
        let a = ["x", "y", "z", "w"];
        assert_eq!(exact_match_accuracy(&a, &a).unwrap(), 1.0);
        assert_eq!(exact_match_accuracy(&a, &["x", "y", "z", "q"]).unwrap(), 0.75);
        assert_eq!(exact_match_accuracy(&[""], &["  "]).unwrap(), 1.0);
        assert!(exact_match_accuracy(&a, &["x"]).is_err());
    }

    struct Fixed(f64);
    impl TokenScorer for Fixed {
        fn score_tokens(&self, text: &str) -> Result<TokenScoreResponse, BackendError> {
            Ok(TokenScoreResponse {
                tokens: text
                    .split_whitespace()
                    .map(|t| TokenLogprob {
                        token: t.into(),
                        logprob: self.0,
                    })
                    .collect(),
            })
        }
    }

    #[test]
    fn perplexity_cases() {
        let v = corpus_perplexity(&["w"], &Fixed(-(4f64).ln()), 1).unwrap();
        assert_relative_eq!(v, 4.0, epsilon = 1e-12);
        let u = UniformScorer::default();
        let v = corpus_perplexity(&["a", "a b c d e", "x y"], &u, 2).unwrap();
        assert_relative_eq!(v, 50257.0, epsilon = 1e-9);
        let empty: [&str; 0] = [];
        assert!(corpus_perplexity(&empty, &u, 1).is_err());
    }

    #[test]
    fn classifier_accuracy_on_sentiment() {
        let clf = SentimentMock::default();
        let labels = vec!["positive".to_string(), "negative".to_string()];
        let neg: StyleLabel = "negative".parse().unwrap();
        let outs = ["the food was bad", "service was terrible"];
        let targets = vec![neg.clone(), neg.clone()];
        assert_eq!(classifier_accuracy(&outs, &targets, &labels, &clf, 2).unwrap(), 1.0);
        let copies = ["the food was good", "service was great"];
        assert_eq!(classifier_accuracy(&copies, &targets, &labels, &clf, 2).unwrap(), 0.0);
        let not_pos: StyleLabel = "not positive".parse().unwrap();
        assert_eq!(
            classifier_accuracy(&outs, &[not_pos.clone(), not_pos], &labels, &clf, 1).unwrap(),
            1.0
        );
        let empty: [&str; 0] = [];
        assert!(classifier_accuracy(&empty, &[], &labels, &clf, 1).is_err());
    }

    #[test]
    fn summary_ranges() {
        let mut s = EvalSummary {
            r_sbleu: Some(20.0),
            accuracy: Some(0.5),
            ppl: Some(30.0),
            ..Default::default()
        };
        assert!(s.validate().is_ok());
        s.accuracy = Some(1.5);
        assert!(s.validate().is_err());
        let json = serde_json::to_string(&EvalSummary::default()).unwrap();
        assert!(json.contains("\"gleu\":null"));
    }
}
