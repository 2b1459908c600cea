//! Independent reference implementations used as test oracles.
//!
//! They work on whitespace tokens, so callers feed them lowercase,
//! punctuation-free text where that matches `tokenize_eval`.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;

pub fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Every n-gram occurrence, in order, by explicit slicing.
pub fn all_ngrams<'a>(toks: &[&'a str], n: usize) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    if toks.len() >= n {
        for start in 0..=toks.len() - n {
            out.push(toks[start..start + n].to_vec());
        }
    }
    out
}

fn occurrences(list: &[Vec<&str>], g: &[&str]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct<'a>(list: &[Vec<&'a str>]) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// Sum over distinct n-grams of min(count in a, count in b).
pub fn clipped(a: &[Vec<&str>], b: &[Vec<&str>]) -> usize {
    distinct(a)
        .iter()
        .map(|g| occurrences(a, g).min(occurrences(b, g)))
        .sum()
}

/// Corpus BLEU-4 on the 0-100 scale, computed with products instead of logs.
pub fn oracle_bleu(hyps: &[String], refs: &[String]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        let hw = words(h);
        let rw = words(rf);
        c += hw.len();
        r += rw.len();
        for n in 1..=4 {
            let hg = all_ngrams(&hw, n);
            let rg = all_ngrams(&rw, n);
            t[n - 1] += hg.len();
            m[n - 1] += clipped(&hg, &rg);
        }
    }
    if c == 0 {
        return if r == 0 { 100.0 } else { 0.0 };
    }
    if m[0] == 0 {
        return 0.0;
    }
    let mut product = m[0] as f64 / t[0] as f64;
    for n in 1..4 {
        product *= if m[n] == 0 {
            1.0 / (t[n] + 1) as f64
        } else {
            m[n] as f64 / t[n] as f64
        };
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * product.powf(0.25)
}

/// Sentence GLEU with zero statistics smoothed to one.
pub fn oracle_gleu(src: &str, hyp: &str, reference: &str) -> f64 {
    let s = words(src);
    let h = words(hyp);
    let r = words(reference);
    let one_if_zero = |x: usize| if x == 0 { 1.0 } else { x as f64 };
    let mut product = 1.0;
    for n in 1..=4 {
        let hg = all_ngrams(&h, n);
        let rg = all_ngrams(&r, n);
        let sg = all_ngrams(&s, n);
        let source_only: Vec<Vec<&str>> = sg.iter().filter(|g| !rg.contains(g)).cloned().collect();
        let reward = clipped(&hg, &rg);
        let penalty = clipped(&hg, &source_only);
        let num = reward.saturating_sub(penalty);
        let den = hg.len();
        product *= one_if_zero(num) / one_if_zero(den);
    }
    let c = one_if_zero(h.len());
    let rl = one_if_zero(r.len());
    let bp = if c < rl { (1.0 - rl / c).exp() } else { 1.0 };
    bp * product.powf(0.25)
}

pub const TOY_VOCAB: [&str; 8] = ["the", "cat", "dog", "sat", "on", "mat", "a", "red"];

pub fn random_sentence(rng: &mut impl Rng, vocab: &[&str], max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| *vocab.choose(rng).expect("non-empty vocab"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_nonempty(rng: &mut impl Rng, vocab: &[&str], max_len: usize) -> String {
    loop {
        let s = random_sentence(rng, vocab, max_len);
        if !s.is_empty() {
            return s;
        }
    }
}

/// A corpus of 1 to `max_pairs` (hypothesis, reference) pairs.
pub fn random_corpus(rng: &mut impl Rng, max_pairs: usize) -> (Vec<String>, Vec<String>) {
    let n = rng.random_range(1..=max_pairs);
    let vocab_size = rng.random_range(2..=TOY_VOCAB.len());
    let vocab = &TOY_VOCAB[..vocab_size];
    let hyps = (0..n).map(|_| random_sentence(rng, vocab, 12)).collect();
    let refs = (0..n).map(|_| random_sentence(rng, vocab, 12)).collect();
    (hyps, refs)
}

pub mod server;
