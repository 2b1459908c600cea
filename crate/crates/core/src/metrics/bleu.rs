use serde::{Deserialize, Serialize};

use super::tokenize::{ngram_counts, tokenize_eval};
use super::MetricError;

pub const MAX_ORDER: usize = 4;

/// Corpus BLEU-4 and its components. Precisions are fractions in `[0, 1]`
/// after smoothing; `score` is on the 0-100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub score: f64,
    pub ngram_precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
}

/// Corpus-level BLEU-4 over [`tokenize_eval`] tokens with one reference per
/// hypothesis.
///
/// Clipped n-gram matches and n-gram totals are summed over the corpus
/// before dividing. For orders 2-4 a zero match count is smoothed to
/// `1 / (total + 1)`; a zero unigram match count gives a score of 0. The
/// brevity penalty is `exp(1 - r/c)` when the hypotheses are shorter than
/// the references. Two empty corpora of text compare as identical (100).
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(
    hyps: &[H],
    refs: &[R],
) -> Result<BleuReport, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }

    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize_eval(h.as_ref());
        let r = tokenize_eval(r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
            matches[n - 1] += hc
                .iter()
                .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    Ok(score_from_stats(matches, totals, hyp_len, ref_len))
}

fn score_from_stats(
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
) -> BleuReport {
    let report = |score, ngram_precisions, brevity_penalty| BleuReport {
        score,
        ngram_precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
        matches,
        totals,
    };
    if hyp_len == 0 {
        return if ref_len == 0 {
            report(100.0, [1.0; MAX_ORDER], 1.0)
        } else {
            report(0.0, [0.0; MAX_ORDER], 0.0)
        };
    }

    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        precisions[n] = if n > 0 && matches[n] == 0 {
            1.0 / (totals[n] as f64 + 1.0)
        } else {
            matches[n] as f64 / totals[n] as f64
        };
    }
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    if matches[0] == 0 {
        return report(0.0, precisions, bp);
    }
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    let score = (100.0 * bp * log_mean.exp()).clamp(0.0, 100.0);
    report(score, precisions, bp)
}

/// BLEU of outputs against their own inputs; high values signal copying.
pub fn self_sbleu<H: AsRef<str>, S: AsRef<str>>(
    outputs: &[H],
    sources: &[S],
) -> Result<f64, MetricError> {
    Ok(corpus_bleu(outputs, sources)?.score)
}

/// BLEU of outputs against human references.
pub fn ref_sbleu<H: AsRef<str>, R: AsRef<str>>(
    outputs: &[H],
    references: &[R],
) -> Result<f64, MetricError> {
    Ok(corpus_bleu(outputs, references)?.score)
}
