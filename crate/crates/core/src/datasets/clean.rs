/// Contraction suffixes that tokenized corpora split off their stem
/// (`do n't`, `it 's`). A gap before one of these is always closed.
pub const CONTRACTION_SUFFIXES: &[&str] = &["n't", "'s", "'re", "'ve", "'ll", "'d", "'m"];

const NO_SPACE_BEFORE: &[char] = &['.', ',', '!', '?', ';', ':', '\'', ')'];
const NO_SPACE_AFTER: &[char] = &['(', '\''];

fn joins(prev: &str, next: &str) -> bool {
    next.starts_with(NO_SPACE_BEFORE)
        || prev.ends_with(NO_SPACE_AFTER)
        || CONTRACTION_SUFFIXES
            .iter()
            .any(|s| next.eq_ignore_ascii_case(s))
}

fn clean_pass(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut prev: Option<&str> = None;
    for tok in raw.split_whitespace() {
        if let Some(p) = prev {
            if !joins(p, tok) {
                out.push(' ');
            }
        }
        out.push_str(tok);
        prev = Some(tok);
    }
    out
}

/// Undoes tokenizer spacing: collapses whitespace runs, drops spaces before
/// `. , ! ? ; : ' )` and after `( '`, and rejoins split contractions.
///
/// Only whitespace is ever removed. Passes repeat until nothing changes, so
/// the result is a fixed point.
pub fn clean_text(raw: &str) -> String {
    let mut current = clean_pass(raw);
    loop {
        let next = clean_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}
