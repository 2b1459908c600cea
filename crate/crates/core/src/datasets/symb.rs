use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, StylePairRecord};
use crate::prompt::StyleLabel;

const ANIMALS: [&str; 20] = [
    "cat", "dog", "horse", "cow", "sheep", "goat", "pig", "lion", "tiger", "bear", "wolf", "fox",
    "rabbit", "mouse", "deer", "zebra", "camel", "monkey", "eagle", "owl",
];
const COLORS: [&str; 12] = [
    "red", "blue", "green", "yellow", "purple", "pink", "brown", "black", "white", "gray",
    "violet", "cyan",
];
const FRUITS: [&str; 15] = [
    "apple", "banana", "cherry", "grape", "lemon", "mango", "peach", "pear", "plum", "kiwi",
    "melon", "orange", "apricot", "fig", "lime",
];
const NUMBERS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// Parameters of the symbolic-comparison dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbSpec {
    /// Category name and its words, in a fixed order.
    pub categories: Vec<(String, Vec<String>)>,
    pub n: usize,
    pub seed: u64,
}

impl Default for SymbSpec {
    fn default() -> Self {
        let cat = |name: &str, words: &[&str]| {
            (name.to_string(), words.iter().map(|w| w.to_string()).collect())
        };
        Self {
            categories: vec![
                cat("animals", &ANIMALS),
                cat("colors", &COLORS),
                cat("fruits", &FRUITS),
                cat("numbers", &NUMBERS),
            ],
            n: 1000,
            seed: 0,
        }
    }
}

impl SymbSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let invalid = |m: String| Err(DatasetError::InvalidSpec(m));
        if self.n == 0 {
            return invalid("n must be at least 1".into());
        }
        let mut seen = HashSet::new();
        for (name, words) in &self.categories {
            for w in words {
                if !is_word(w) {
                    return invalid(format!("`{w}` in {name} is not a single token"));
                }
                if !seen.insert(w.as_str()) {
                    return invalid(format!("`{w}` appears in more than one place"));
                }
            }
        }
        let cap = self.capacity();
        if self.n > cap {
            return invalid(format!("n = {} exceeds the {cap} distinct comparisons", self.n));
        }
        Ok(())
    }

    /// Number of distinct `a op b` strings with `a != b` drawn from one category.
    pub fn capacity(&self) -> usize {
        self.categories
            .iter()
            .map(|(_, w)| 2 * w.len() * w.len().saturating_sub(1))
            .sum()
    }
}

fn is_word(w: &str) -> bool {
    !w.is_empty() && w.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// `n` distinct comparisons `a > b` / `a < b`, sampled without replacement
/// from all same-category ordered pairs, with their English verbalizations
/// as references.
pub fn generate_symb(spec: &SymbSpec) -> Result<Vec<StylePairRecord>, DatasetError> {
    spec.validate()?;
    let mut pool = Vec::with_capacity(spec.capacity());
    for (_, words) in &spec.categories {
        for a in words {
            for b in words {
                if a != b {
                    pool.push(format!("{a} > {b}"));
                    pool.push(format!("{a} < {b}"));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pool.shuffle(&mut rng);
    pool.truncate(spec.n);

    let source_style = StyleLabel::new("symbolic").expect("non-empty");
    let target_style = StyleLabel::new("English").expect("non-empty");
    let width = spec.n.to_string().len().max(4);
    pool.into_iter()
        .enumerate()
        .map(|(i, source)| {
            Ok(StylePairRecord {
                id: format!("symb-{i:0width$}"),
                reference: Some(verbalize_comparison(&source)?),
                source,
                source_style: source_style.clone(),
                target_style: target_style.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ComparisonParseError {
    pub position: usize,
    pub message: String,
}

fn tokens_with_offsets(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(st)) => {
                out.push((st, &s[st..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push((st, &s[st..]));
    }
    out
}

fn expect_word(tok: Option<&(usize, &str)>, end: usize) -> Result<String, ComparisonParseError> {
    match tok {
        Some(&(_, w)) if is_word(w) => Ok(w.to_string()),
        Some(&(pos, w)) => Err(ComparisonParseError {
            position: pos,
            message: format!("expected a word, found `{w}`"),
        }),
        None => Err(ComparisonParseError {
            position: end,
            message: "expected a word, found end of input".into(),
        }),
    }
}

fn expect_end(toks: &[(usize, &str)], at: usize) -> Result<(), ComparisonParseError> {
    match toks.get(at) {
        Some(&(pos, t)) => Err(ComparisonParseError {
            position: pos,
            message: format!("unexpected trailing `{t}`"),
        }),
        None => Ok(()),
    }
}

/// `a > b` becomes `a is greater than b`; `a < b` becomes `a is less than b`.
pub fn verbalize_comparison(symbolic: &str) -> Result<String, ComparisonParseError> {
    let toks = tokens_with_offsets(symbolic);
    let end = symbolic.len();
    let a = expect_word(toks.first(), end)?;
    let relation = match toks.get(1) {
        Some(&(_, ">")) => "greater",
        Some(&(_, "<")) => "less",
        Some(&(pos, t)) => {
            return Err(ComparisonParseError {
                position: pos,
                message: format!("expected `>` or `<`, found `{t}`"),
            })
        }
        None => {
            return Err(ComparisonParseError {
                position: end,
                message: "expected `>` or `<`, found end of input".into(),
            })
        }
    };
    let b = expect_word(toks.get(2), end)?;
    expect_end(&toks, 3)?;
    Ok(format!("{a} is {relation} than {b}"))
}

/// Inverse of [`verbalize_comparison`].
pub fn parse_comparison(english: &str) -> Result<String, ComparisonParseError> {
    let toks = tokens_with_offsets(english);
    let end = english.len();
    let keyword = |i: usize, want: &str| match toks.get(i) {
        Some(&(_, t)) if t == want => Ok(()),
        Some(&(pos, t)) => Err(ComparisonParseError {
            position: pos,
            message: format!("expected `{want}`, found `{t}`"),
        }),
        None => Err(ComparisonParseError {
            position: end,
            message: format!("expected `{want}`, found end of input"),
        }),
    };
    let a = expect_word(toks.first(), end)?;
    keyword(1, "is")?;
    let op = match toks.get(2) {
        Some(&(_, "greater")) => '>',
        Some(&(_, "less")) => '<',
        Some(&(pos, t)) => {
            return Err(ComparisonParseError {
                position: pos,
                message: format!("expected `greater` or `less`, found `{t}`"),
            })
        }
        None => {
            return Err(ComparisonParseError {
                position: end,
                message: "expected `greater` or `less`, found end of input".into(),
            })
        }
    };
    keyword(3, "than")?;
    let b = expect_word(toks.get(4), end)?;
    expect_end(&toks, 5)?;
    Ok(format!("{a} {op} {b}"))
}
