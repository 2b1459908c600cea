use std::collections::HashMap;

fn keeps_between_digits(c: char) -> bool {
    matches!(c, '.' | ',' | '-')
}

/// Lowercases, splits ASCII punctuation into separate tokens and splits on
/// whitespace. Apostrophes stay inside words, and `.`, `,` and `-` stay
/// inside numbers (`3.5`, `1,000`, `10-20`), mirroring the usual 13a rules.
pub fn tokenize_eval(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut out = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            continue;
        }
        let splits = c.is_ascii_punctuation()
            && c != '\''
            && !(keeps_between_digits(c)
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()));
        if splits {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(c.to_string());
        } else {
            word.push(c);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Multiset of the order-`n` n-grams of `tokens`.
pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}
