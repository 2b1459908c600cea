use std::collections::HashMap;

use super::tokenize::{ngram_counts, tokenize_eval};
use super::MetricError;

const ORDER: usize = 4;

fn clipped_overlap(a: &HashMap<&[String], usize>, b: &HashMap<&[String], usize>) -> usize {
    a.iter()
        .map(|(g, c)| (*c).min(b.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Sentence-level GLEU for one source, hypothesis and reference, in `[0, 1]`.
///
/// For each order n the numerator is the clipped hypothesis/reference
/// overlap minus the clipped overlap between the hypothesis and the source
/// n-grams that never occur in the reference (floored at 0); the
/// denominator is the number of hypothesis n-grams. Zero statistics are
/// smoothed to 1. The score is `exp(min(0, 1 - r/c) + mean_n ln p_n)`.
pub fn sentence_gleu(src: &str, hyp: &str, reference: &str) -> Result<f64, MetricError> {
    for (name, text) in [("source", src), ("hypothesis", hyp), ("reference", reference)] {
        if text.trim().is_empty() {
            return Err(MetricError::EmptyText(name));
        }
    }
    let s = tokenize_eval(src);
    let h = tokenize_eval(hyp);
    let r = tokenize_eval(reference);

    let smooth = |x: usize| if x == 0 { 1.0 } else { x as f64 };
    let c = smooth(h.len());
    let rl = smooth(r.len());

    let mut log_prec = 0.0;
    for n in 1..=ORDER {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        let mut source_only = ngram_counts(&s, n);
        source_only.retain(|g, _| !rc.contains_key(g));
        let num = clipped_overlap(&hc, &rc).saturating_sub(clipped_overlap(&hc, &source_only));
        let den = (h.len() + 1).saturating_sub(n);
        log_prec += (smooth(num) / smooth(den)).ln();
    }
    let log_bp = (1.0 - rl / c).min(0.0);
    Ok((log_bp + log_prec / ORDER as f64).exp())
}
