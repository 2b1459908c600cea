mod common;

use approx::assert_abs_diff_eq;
use prompt_rerank::metrics::{corpus_bleu, ref_sbleu, self_sbleu, sentence_gleu};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_bleu, oracle_gleu, random_corpus, random_nonempty, TOY_VOCAB};

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn repeated_token_pair_matches_oracle() {
    let h = strings(&["the the the the"]);
    let r = strings(&["the cat"]);
    let got = corpus_bleu(&h, &r).unwrap().score;
    assert_abs_diff_eq!(got, oracle_bleu(&h, &r), epsilon = 1e-9);
}

#[test]
fn five_pair_corpus_matches_oracle() {
    let h = strings(&[
        "the cat sat on the mat",
        "a red dog",
        "the dog sat",
        "on the mat a cat",
        "red red red",
    ]);
    let r = strings(&[
        "the cat sat on a mat",
        "a red dog sat",
        "the dog sat on the mat",
        "a cat on the mat",
        "the red cat",
    ]);
    assert_abs_diff_eq!(ref_sbleu(&h, &r).unwrap(), oracle_bleu(&h, &r), epsilon = 1e-6);
    assert_abs_diff_eq!(self_sbleu(&h, &h).unwrap(), 100.0, epsilon = 1e-9);
}

#[test]
fn randomized_corpora_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..300 {
        let (h, r) = random_corpus(&mut rng, 10);
        let got = corpus_bleu(&h, &r).unwrap().score;
        let want = oracle_bleu(&h, &r);
        assert!((got - want).abs() < 1e-6, "case {case}: {got} vs {want}\n{h:?}\n{r:?}");
    }
}

#[test]
fn gleu_three_token_triple() {
    let v = sentence_gleu("a b c", "a b c", "a x c").unwrap();
    assert_abs_diff_eq!(v, oracle_gleu("a b c", "a b c", "a x c"), epsilon = 1e-12);
}

#[test]
fn gleu_randomized_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..300 {
        let s = random_nonempty(&mut rng, &TOY_VOCAB[..5], 6);
        let h = random_nonempty(&mut rng, &TOY_VOCAB[..5], 6);
        let r = random_nonempty(&mut rng, &TOY_VOCAB[..5], 6);
        let got = sentence_gleu(&s, &h, &r).unwrap();
        let want = oracle_gleu(&s, &h, &r);
        assert!((got - want).abs() < 1e-9, "case {case}: ({s}|{h}|{r}) {got} vs {want}");
    }
}
