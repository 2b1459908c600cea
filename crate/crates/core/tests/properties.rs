mod common;

use prompt_rerank::backend::mock::{HashEmbedder, SentimentMock, UniformScorer};
use prompt_rerank::backend::Backends;
use prompt_rerank::datasets::{clean_text, parse_comparison, read_dataset, verbalize_comparison, write_records, DatasetFormat, LoadOptions, StylePairRecord};
use prompt_rerank::metrics::{corpus_bleu, corpus_perplexity, exact_match_accuracy, sentence_gleu};
use prompt_rerank::par_map;
use prompt_rerank::prompt::{builtin_delimiters, extract_completion, render_prompt, TemplateKind, TransferRequest};
use prompt_rerank::rerank::{l1_strength, select_winner, RerankConfig, RerankScore, Reranker, PROB_FLOOR};
use proptest::prelude::*;
use std::sync::Arc;

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(common::TOY_VOCAB.to_vec()), 0..12).prop_map(|w| w.join(" "))
}

fn nonempty_sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(common::TOY_VOCAB.to_vec()), 1..10).prop_map(|w| w.join(" "))
}

fn corpus() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec((sentence(), sentence()), 1..10)
}

fn score_tuple() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-30.0..0.0f64, -30.0..0.0f64, -300.0..0.0f64), 1..8)
}

fn scores(t: &[(f64, f64, f64)]) -> Vec<RerankScore> {
    t.iter().map(|&(a, b, c)| RerankScore::new(a, b, Some(c))).collect()
}

fn mock_reranker() -> Reranker {
    let backends = Backends {
        scorer: Some(Arc::new(UniformScorer::default())),
        mask_filler: Some(Arc::new(SentimentMock::default())),
        embedder: Some(Arc::new(HashEmbedder::default())),
        ..Backends::default()
    };
    Reranker::with_backends(RerankConfig::default(), backends).unwrap()
}

proptest! {
    #[test]
    fn bleu_matches_oracle(pairs in corpus()) {
        let (h, r): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        let got = corpus_bleu(&h, &r).unwrap().score;
        prop_assert!((got - common::oracle_bleu(&h, &r)).abs() < 1e-6);
        prop_assert!((0.0..=100.0).contains(&got));
    }

    #[test]
    fn bleu_identity(xs in prop::collection::vec(sentence(), 1..10)) {
        let r = corpus_bleu(&xs, &xs).unwrap();
        prop_assert!((r.score - 100.0).abs() < 1e-9);
        prop_assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn bleu_permutation_invariant(pairs in corpus(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (h1, r1): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        let (h2, r2): (Vec<String>, Vec<String>) = shuffled.into_iter().unzip();
        let a = corpus_bleu(&h1, &r1).unwrap().score;
        let b = corpus_bleu(&h2, &r2).unwrap().score;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn gleu_bounds_and_perfect_rewrite(s in nonempty_sentence(), h in nonempty_sentence(), r in nonempty_sentence()) {
        let g = sentence_gleu(&s, &h, &r).unwrap();
        prop_assert!(g > 0.0 && g <= 1.0 + 1e-12);
        prop_assert!((g - common::oracle_gleu(&s, &h, &r)).abs() < 1e-9);
        prop_assert!((sentence_gleu(&s, &r, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_match_symmetric(pairs in prop::collection::vec((sentence(), sentence()), 1..10)) {
        let (a, b): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        prop_assert_eq!(exact_match_accuracy(&a, &b).unwrap(), exact_match_accuracy(&b, &a).unwrap());
    }

    #[test]
    fn uniform_perplexity_is_vocab_size(xs in prop::collection::vec(nonempty_sentence(), 1..10), v in 2u64..100_000) {
        let u = UniformScorer { vocab_size: v };
        let ppl = corpus_perplexity(&xs, &u, 3).unwrap();
        prop_assert!((ppl - v as f64).abs() <= 1e-9 * v as f64);
    }

    #[test]
    fn strength_complement(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let s = l1_strength(a, b) + l1_strength(b, a);
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&l1_strength(a, b)));
    }

    #[test]
    fn argmax_invariant_under_shift(t in score_tuple(), c in -50.0..50.0f64, factor in 0usize..3) {
        let base = select_winner(&scores(&t)).unwrap();
        let shifted: Vec<(f64, f64, f64)> = t.iter().map(|&(a, b, f)| match factor {
            0 => (a + c, b, f),
            1 => (a, b + c, f),
            _ => (a, b, f + c),
        }).collect();
        // Shifting can reorder exact ties only through rounding; compare composites.
        let w = select_winner(&scores(&shifted)).unwrap();
        let s = scores(&shifted);
        prop_assert!(w < t.len());
        prop_assert!((s[w].composite - s[base].composite).abs() < 1e-9);
    }

    #[test]
    fn winner_composite_is_maximal(t in score_tuple()) {
        let s = scores(&t);
        let w = select_winner(&s).unwrap();
        prop_assert!(s.iter().all(|x| x.composite <= s[w].composite));
        prop_assert!(s[..w].iter().all(|x| x.composite < s[w].composite));
    }

    #[test]
    fn composite_monotone(t in score_tuple(), dec in 0.01..10.0f64, factor in 0usize..3) {
        let s = scores(&t);
        let w = select_winner(&s).unwrap();
        let (a, b, f) = t[w];
        let lowered = match factor {
            0 => RerankScore::new(a - dec, b, Some(f)),
            1 => RerankScore::new(a, b - dec, Some(f)),
            _ => RerankScore::new(a, b, Some(f - dec)),
        };
        prop_assert!(lowered.composite < s[w].composite);
    }

    #[test]
    fn prompt_round_trip(x in "[a-zA-Z0-9 ,.!?']{1,40}", t in 0usize..4, d in 0usize..10) {
        prop_assume!(!x.trim().is_empty());
        let delim = builtin_delimiters()[d].clone();
        prop_assume!(!x.contains(delim.close()));
        let req = TransferRequest::new(
            x.clone(),
            "positive".parse().unwrap(),
            "negative".parse().unwrap(),
            TemplateKind::ALL[t],
            delim.clone(),
        );
        let prompt = render_prompt(&req).unwrap();
        prop_assert!(prompt.ends_with(delim.open()));
        let ex = extract_completion(&format!("{x}{} trailing junk", delim.close()), &delim);
        prop_assert_eq!(ex.text, x.trim());
        prop_assert!(!ex.unterminated);
    }

    #[test]
    fn clean_is_idempotent_and_only_removes_whitespace(x in "[a-z .,!?'()\t]{0,60}") {
        let once = clean_text(&x);
        prop_assert_eq!(clean_text(&once), once.clone());
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        prop_assert_eq!(strip(&once), strip(&x));
    }

    #[test]
    fn comparison_round_trip(a in "[a-z]{1,8}", b in "[a-z]{1,8}", gt in any::<bool>()) {
        let sym = format!("{a} {} {b}", if gt { '>' } else { '<' });
        prop_assert_eq!(parse_comparison(&verbalize_comparison(&sym).unwrap()).unwrap(), sym);
    }

    #[test]
    fn jsonl_round_trip(srcs in prop::collection::vec(nonempty_sentence(), 1..6)) {
        let records: Vec<StylePairRecord> = srcs.iter().enumerate().map(|(i, s)| StylePairRecord {
            id: format!("x{i}"),
            source: s.clone(),
            reference: (i % 2 == 0).then(|| s.to_uppercase()),
            source_style: "formal".parse().unwrap(),
            target_style: "informal".parse().unwrap(),
        }).collect();
        for format in [DatasetFormat::Jsonl, DatasetFormat::Tsv] {
            let mut buf = Vec::new();
            write_records(&mut buf, &records, format).unwrap();
            let back = read_dataset(buf.as_slice(), &LoadOptions::new(format)).unwrap();
            prop_assert_eq!(&back.records, &records);
        }
    }

    #[test]
    fn par_map_keeps_order(xs in prop::collection::vec(any::<u32>(), 0..50), jobs in 1usize..8) {
        let ys = par_map(&xs, jobs, |i, x| (i, *x));
        prop_assert_eq!(ys, xs.iter().copied().enumerate().collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_in_unit_interval_and_symmetric(a in nonempty_sentence(), b in nonempty_sentence()) {
        let rr = mock_reranker();
        let ab = rr.similarity_score(&a, &b).unwrap();
        let ba = rr.similarity_score(&b, &a).unwrap();
        prop_assert!((PROB_FLOOR..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(rr.similarity_score(&a, &a).unwrap(), 1.0);
    }
}
