use crate::backend::Backends;
use crate::datasets::StylePairRecord;
use crate::metrics::{
    classifier_accuracy, corpus_perplexity, exact_match_accuracy, mean_sentence_gleu, ref_sbleu,
    self_sbleu, EvalSummary, MetricError,
};
use crate::prompt::StyleLabel;

/// One output to evaluate alongside its input and optional reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub source: String,
    pub output: String,
    pub reference: Option<String>,
    pub source_style: StyleLabel,
    pub target_style: StyleLabel,
}

/// Style names in order of first appearance across both directions.
pub fn style_label_set<'a>(pairs: impl IntoIterator<Item = (&'a StyleLabel, &'a StyleLabel)>) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for (s, t) in pairs {
        for l in [s, t] {
            if !labels.iter().any(|x| x == l.name()) {
                labels.push(l.name().to_string());
            }
        }
    }
    labels
}

/// Computes every metric the inputs and backends allow.
///
/// s-sBLEU always; r-sBLEU, GLEU and exact match over the items that carry
/// a reference; accuracy when a classifier is connected and at least two
/// style names occur; perplexity when a token scorer is connected.
pub fn evaluate(items: &[EvalItem], backends: &Backends, jobs: usize) -> Result<EvalSummary, MetricError> {
    if items.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let outputs: Vec<&str> = items.iter().map(|i| i.output.as_str()).collect();
    let sources: Vec<&str> = items.iter().map(|i| i.source.as_str()).collect();
    let mut summary = EvalSummary {
        s_sbleu: Some(self_sbleu(&outputs, &sources)?),
        ..EvalSummary::default()
    };

    let with_ref: Vec<(&EvalItem, &str)> = items
        .iter()
        .filter_map(|i| i.reference.as_deref().map(|r| (i, r)))
        .collect();
    if !with_ref.is_empty() {
        let outs: Vec<&str> = with_ref.iter().map(|(i, _)| i.output.as_str()).collect();
        let srcs: Vec<&str> = with_ref.iter().map(|(i, _)| i.source.as_str()).collect();
        let refs: Vec<&str> = with_ref.iter().map(|(_, r)| *r).collect();
        summary.r_sbleu = Some(ref_sbleu(&outs, &refs)?);
        summary.gleu = Some(mean_sentence_gleu(&srcs, &outs, &refs)?);
        summary.exact_match = Some(exact_match_accuracy(&outs, &refs)?);
    }

    if let Ok(clf) = backends.classifier() {
        let labels = style_label_set(items.iter().map(|i| (&i.source_style, &i.target_style)));
        if labels.len() >= 2 {
            let targets: Vec<StyleLabel> = items.iter().map(|i| i.target_style.clone()).collect();
            summary.accuracy = Some(classifier_accuracy(&outputs, &targets, &labels, clf, jobs)?);
        }
    }
    if let Ok(scorer) = backends.scorer() {
        if outputs.iter().any(|o| !o.trim().is_empty()) {
            summary.ppl = Some(corpus_perplexity(&outputs, scorer, jobs)?);
        }
    }
    Ok(summary)
}

/// Scores the do-nothing system that returns every input unchanged.
pub fn copy_baseline(records: &[StylePairRecord], backends: &Backends, jobs: usize) -> Result<EvalSummary, MetricError> {
    let items: Vec<EvalItem> = records
        .iter()
        .map(|r| EvalItem {
            source: r.source.clone(),
            output: r.source.clone(),
            reference: r.reference.clone(),
            source_style: r.source_style.clone(),
            target_style: r.target_style.clone(),
        })
        .collect();
    evaluate(&items, backends, jobs)
}
