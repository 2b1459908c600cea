//! Deterministic in-process stand-ins for the model services.
//!
//! Every mock is a pure function of its request, so repeated calls return
//! identical responses and concurrent use is safe. Mocks tokenize on
//! whitespace.
//!
//! | spec                | serves                  | behaviour                                   |
//! |---------------------|-------------------------|---------------------------------------------|
//! | `mock:echo[=TEXT]`  | completion              | `k` copies of a canned string               |
//! | `mock:copy`         | completion              | copies the query's source text              |
//! | `mock:lexicon`      | completion, scoring     | one antonym-flipped candidate among copies  |
//! | `mock:symbolic`     | completion              | verbalizes `a > b` / `a < b`                |
//! | `mock:uniform[=V]`  | scoring                 | every token gets `-ln V` (default 50257)    |
//! | `mock:sentiment`    | mask filling, classifier| lexicon-count sentiment                     |
//! | `mock:flat`         | mask filling, classifier| every label equally likely                  |
//! | `mock:hash[=DIM]`   | embedding               | per-token vectors seeded by a string hash   |

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_labels, check_mask, check_text, BackendEndpoints, BackendError, Classifier,
    CompletionRequest, CompletionResponse, Embedder, EmbeddingResponse, GeneratedText, Generator,
    MaskFiller, MaskFillResponse, TokenLogprob, TokenScoreResponse, TokenScorer,
};
use crate::datasets::verbalize_comparison;
use crate::prompt::{builtin_delimiters, DelimiterPair};

/// Antonym pairs, positive word first.
pub const ANTONYMS: &[(&str, &str)] = &[
    ("good", "bad"),
    ("great", "terrible"),
    ("love", "hate"),
    ("loved", "hated"),
    ("best", "worst"),
    ("delicious", "disgusting"),
    ("friendly", "rude"),
    ("amazing", "awful"),
    ("excellent", "poor"),
    ("happy", "sad"),
    ("nice", "nasty"),
    ("wonderful", "horrible"),
    ("fresh", "stale"),
    ("clean", "dirty"),
    ("recommend", "avoid"),
];

pub const GPT2_VOCAB_SIZE: u64 = 50257;

/// Replaces every lexicon word with its antonym, keeping capitalization
/// and everything between words untouched.
pub fn flip_sentiment(text: &str) -> String {
    map_words(text, |w| {
        let lower = w.to_lowercase();
        ANTONYMS.iter().find_map(|&(p, n)| {
            if lower == p {
                Some(n)
            } else if lower == n {
                Some(p)
            } else {
                None
            }
        })
        .map(|ant| match_case(w, ant))
    })
}

/// Counts of positive and negative lexicon words.
pub fn polarity(text: &str) -> (usize, usize) {
    let mut pos = 0;
    let mut neg = 0;
    map_words(text, |w| {
        let lower = w.to_lowercase();
        if ANTONYMS.iter().any(|&(p, _)| p == lower) {
            pos += 1;
        } else if ANTONYMS.iter().any(|&(_, n)| n == lower) {
            neg += 1;
        }
        None
    });
    (pos, neg)
}

fn map_words(text: &str, mut f: impl FnMut(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let mut flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            match f(word) {
                Some(r) => out.push_str(&r),
                None => out.push_str(word),
            }
            word.clear();
        }
    };
    for c in text.chars() {
        if c.is_alphabetic() {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.len() > 1 && original.chars().all(|c| c.is_uppercase()) {
        replacement.to_uppercase()
    } else if original.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = replacement.chars();
        match cs.next() {
            Some(first) => first.to_uppercase().chain(cs).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Finds the source text of the query block (the prompt's last line).
///
/// The delimiter is the longest known opening marker the prompt ends with;
/// the source is the text between the first opening marker of the block and
/// the last closing marker before the trailing one.
pub fn locate_source<'d>(
    prompt: &str,
    delimiters: &'d [DelimiterPair],
) -> Option<(String, &'d DelimiterPair)> {
    let block = prompt.rsplit('\n').next().unwrap_or(prompt);
    let mut candidates: Vec<&DelimiterPair> = delimiters
        .iter()
        .filter(|d| block.ends_with(d.open()))
        .collect();
    candidates.sort_by_key(|d| std::cmp::Reverse(d.open().len()));
    candidates.into_iter().find_map(|d| {
        let body = &block[..block.len() - d.open().len()];
        let start = body.find(d.open())? + d.open().len();
        let end = body.rfind(d.close())?;
        (end >= start).then(|| (body[start..end].to_string(), d))
    })
}

fn mock_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn truncate_tokens(text: String, max: u32) -> String {
    let tokens = mock_tokens(&text);
    if tokens.len() as u64 > max as u64 {
        tokens[..max as usize].join(" ")
    } else {
        text
    }
}

fn pack(texts: Vec<String>, req: &CompletionRequest) -> CompletionResponse {
    CompletionResponse {
        candidates: texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| GeneratedText {
                text: truncate_tokens(text, req.max_new_tokens),
                gen_score: -0.25 * (i as f64 + 1.0),
            })
            .collect(),
    }
}

fn source_or_err<'d>(
    prompt: &str,
    delimiters: &'d [DelimiterPair],
) -> Result<(String, &'d DelimiterPair), BackendError> {
    locate_source(prompt, delimiters).ok_or_else(|| {
        BackendError::Precondition("mock generator could not locate the source text".into())
    })
}

#[derive(Debug, Clone)]
enum EchoMode {
    Canned(String),
    CopyInput,
}

/// Returns `k` identical candidates: a canned string, or the query's source
/// text followed by the closing marker.
#[derive(Debug, Clone)]
pub struct EchoMock {
    mode: EchoMode,
    delimiters: Vec<DelimiterPair>,
}

impl EchoMock {
    pub fn canned(text: impl Into<String>) -> Self {
        Self {
            mode: EchoMode::Canned(text.into()),
            delimiters: builtin_delimiters(),
        }
    }

    pub fn copy_input() -> Self {
        Self {
            mode: EchoMode::CopyInput,
            delimiters: builtin_delimiters(),
        }
    }

    pub fn with_delimiters(mut self, delimiters: Vec<DelimiterPair>) -> Self {
        self.delimiters = delimiters;
        self
    }
}

impl Generator for EchoMock {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let text = match &self.mode {
            EchoMode::Canned(s) => s.clone(),
            EchoMode::CopyInput => {
                let (src, d) = source_or_err(&req.prompt, &self.delimiters)?;
                format!("{src}{}", d.close())
            }
        };
        Ok(pack(vec![text; req.num_candidates as usize], req))
    }
}

/// Emits one antonym-flipped candidate among `k - 1` verbatim copies.
///
/// The flipped candidate sits at position `seed % k` (position 0 when no
/// seed is given), so the top beam is the flipped one for exactly one seed
/// in every `k` consecutive seeds.
#[derive(Debug, Clone)]
pub struct LexiconFlipMock {
    delimiters: Vec<DelimiterPair>,
}

impl Default for LexiconFlipMock {
    fn default() -> Self {
        Self {
            delimiters: builtin_delimiters(),
        }
    }
}

impl LexiconFlipMock {
    pub fn with_delimiters(delimiters: Vec<DelimiterPair>) -> Self {
        Self { delimiters }
    }
}

impl Generator for LexiconFlipMock {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let (src, d) = source_or_err(&req.prompt, &self.delimiters)?;
        let k = req.num_candidates as u64;
        let planted = req.seed.unwrap_or(0) % k;
        let texts = (0..k)
            .map(|i| {
                let body = if i == planted {
                    flip_sentiment(&src)
                } else {
                    src.clone()
                };
                format!("{body}{}", d.close())
            })
            .collect();
        Ok(pack(texts, req))
    }
}

impl TokenScorer for LexiconFlipMock {
    fn score_tokens(&self, text: &str) -> Result<TokenScoreResponse, BackendError> {
        check_text(text)?;
        let common = -(200f64).ln();
        let rare = -(GPT2_VOCAB_SIZE as f64).ln();
        Ok(TokenScoreResponse {
            tokens: mock_tokens(text)
                .into_iter()
                .map(|t| {
                    let (p, n) = polarity(t);
                    TokenLogprob {
                        token: t.to_string(),
                        logprob: if p + n > 0 { common } else { rare },
                    }
                })
                .collect(),
        })
    }
}

/// Verbalizes symbolic comparisons; copies anything outside the grammar.
#[derive(Debug, Clone)]
pub struct SymbolicMock {
    delimiters: Vec<DelimiterPair>,
}

impl Default for SymbolicMock {
    fn default() -> Self {
        Self {
            delimiters: builtin_delimiters(),
        }
    }
}

impl Generator for SymbolicMock {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let (src, d) = source_or_err(&req.prompt, &self.delimiters)?;
        let body = verbalize_comparison(src.trim()).unwrap_or(src);
        Ok(pack(
            vec![format!("{body}{}", d.close()); req.num_candidates as usize],
            req,
        ))
    }
}

/// Every token is equally likely under a vocabulary of `vocab_size`.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: u64,
}

impl Default for UniformScorer {
    fn default() -> Self {
        Self {
            vocab_size: GPT2_VOCAB_SIZE,
        }
    }
}

impl TokenScorer for UniformScorer {
    fn score_tokens(&self, text: &str) -> Result<TokenScoreResponse, BackendError> {
        check_text(text)?;
        let lp = -(self.vocab_size as f64).ln();
        Ok(TokenScoreResponse {
            tokens: mock_tokens(text)
                .into_iter()
                .map(|t| TokenLogprob {
                    token: t.to_string(),
                    logprob: lp,
                })
                .collect(),
        })
    }
}

/// Sentiment by lexicon counts over the labels `positive` / `negative`:
/// more positive words gives (0.9, 0.1), more negative (0.1, 0.9), a tie
/// (0.5, 0.5).
#[derive(Debug, Clone)]
pub struct SentimentMock {
    mask_token: String,
}

impl Default for SentimentMock {
    fn default() -> Self {
        Self {
            mask_token: crate::prompt::CLOZE_MASK_DEFAULT.to_string(),
        }
    }
}

impl SentimentMock {
    pub fn with_mask_token(mask_token: impl Into<String>) -> Self {
        Self {
            mask_token: mask_token.into(),
        }
    }

    fn score(&self, text: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_labels(labels)?;
        let multi: Vec<String> = labels
            .iter()
            .filter(|l| l.split_whitespace().count() != 1)
            .cloned()
            .collect();
        if !multi.is_empty() {
            return Err(BackendError::LabelNotSingleToken { labels: multi });
        }
        let unknown: Vec<String> = labels
            .iter()
            .filter(|l| *l != "positive" && *l != "negative")
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(BackendError::LabelNotInVocabulary { labels: unknown });
        }
        let (pos, neg) = polarity(text);
        let (p, n) = match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => (0.9, 0.1),
            std::cmp::Ordering::Less => (0.1, 0.9),
            std::cmp::Ordering::Equal => (0.5, 0.5),
        };
        Ok(MaskFillResponse {
            scores: labels
                .iter()
                .map(|l| (l.clone(), if l == "positive" { p } else { n }))
                .collect(),
        })
    }
}

impl MaskFiller for SentimentMock {
    fn mask_token(&self) -> &str {
        &self.mask_token
    }

    fn fill_mask(&self, cloze: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_mask(cloze, &self.mask_token)?;
        self.score(cloze, labels)
    }
}

impl Classifier for SentimentMock {
    fn classify(&self, text: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_text(text)?;
        self.score(text, labels)
    }
}

/// Masked LM and classifier with no opinion: every label gets likelihood 1,
/// so style strength is always 0.5. Accepts any single-token labels, which
/// makes it the stand-in for styles outside the sentiment lexicon.
#[derive(Debug, Clone)]
pub struct FlatMock {
    mask_token: String,
}

impl Default for FlatMock {
    fn default() -> Self {
        Self::with_mask_token(crate::prompt::CLOZE_MASK_DEFAULT)
    }
}

impl FlatMock {
    pub fn with_mask_token(mask_token: impl Into<String>) -> Self {
        Self {
            mask_token: mask_token.into(),
        }
    }

    fn score(labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_labels(labels)?;
        let multi: Vec<String> = labels
            .iter()
            .filter(|l| l.split_whitespace().count() != 1)
            .cloned()
            .collect();
        if !multi.is_empty() {
            return Err(BackendError::LabelNotSingleToken { labels: multi });
        }
        Ok(MaskFillResponse {
            scores: labels.iter().map(|l| (l.clone(), 1.0)).collect(),
        })
    }
}

impl MaskFiller for FlatMock {
    fn mask_token(&self) -> &str {
        &self.mask_token
    }

    fn fill_mask(&self, cloze: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_mask(cloze, &self.mask_token)?;
        Self::score(labels)
    }
}

impl Classifier for FlatMock {
    fn classify(&self, text: &str, labels: &[String]) -> Result<MaskFillResponse, BackendError> {
        check_text(text)?;
        Self::score(labels)
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Non-contextual embeddings: each lowercased token gets a fixed vector of
/// strictly positive components drawn from a generator seeded by its hash.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: 16 }
    }
}

impl HashEmbedder {
    pub fn vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.to_lowercase().as_bytes()));
        (0..self.dim).map(|_| rng.random_range(0.05..1.0)).collect()
    }
}

impl Embedder for HashEmbedder {
    fn embed_tokens(&self, text: &str) -> Result<EmbeddingResponse, BackendError> {
        check_text(text)?;
        Ok(EmbeddingResponse {
            dim: self.dim,
            vectors: mock_tokens(text).into_iter().map(|t| self.vector(t)).collect(),
        })
    }
}

/// Embeddings looked up from a fixed token table.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    table: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl TableEmbedder {
    pub fn new<I, S>(entries: I) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let table: HashMap<String, Vec<f64>> =
            entries.into_iter().map(|(k, v)| (k.into(), v)).collect();
        let dim = table.values().next().map_or(0, Vec::len);
        if dim == 0 || table.values().any(|v| v.len() != dim) {
            return Err(BackendError::Precondition(
                "table vectors must share a positive dimension".into(),
            ));
        }
        Ok(Self { table, dim })
    }
}

impl Embedder for TableEmbedder {
    fn embed_tokens(&self, text: &str) -> Result<EmbeddingResponse, BackendError> {
        check_text(text)?;
        let vectors = mock_tokens(text)
            .into_iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| BackendError::Precondition(format!("token `{t}` not in table")))
            })
            .collect::<Result<_, _>>()?;
        Ok(EmbeddingResponse {
            dim: self.dim,
            vectors,
        })
    }
}

/// A mock resolved from a `mock:` endpoint spec.
#[derive(Clone)]
pub enum MockHandle {
    Echo(Arc<EchoMock>),
    Lexicon(Arc<LexiconFlipMock>),
    Symbolic(Arc<SymbolicMock>),
    Uniform(Arc<UniformScorer>),
    Sentiment(Arc<SentimentMock>),
    Flat(Arc<FlatMock>),
    Hash(Arc<HashEmbedder>),
}

/// Parses `mock:<name>[=<arg>]`. Returns `Ok(None)` for non-mock addresses.
pub fn from_spec(
    addr: &str,
    endpoints: &BackendEndpoints,
) -> Result<Option<MockHandle>, BackendError> {
    let Some(spec) = addr.strip_prefix("mock:") else {
        return Ok(None);
    };
    let (name, arg) = match spec.split_once('=') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let bad = || BackendError::InvalidEndpoint(addr.to_string());
    let handle = match (name, arg) {
        ("echo", arg) => MockHandle::Echo(Arc::new(EchoMock::canned(arg.unwrap_or("echo")))),
        ("copy", None) => MockHandle::Echo(Arc::new(EchoMock::copy_input())),
        ("lexicon", None) => MockHandle::Lexicon(Arc::default()),
        ("symbolic", None) => MockHandle::Symbolic(Arc::default()),
        ("uniform", arg) => {
            let vocab_size = match arg {
                Some(a) => a.parse().ok().filter(|v| *v >= 2).ok_or_else(bad)?,
                None => GPT2_VOCAB_SIZE,
            };
            MockHandle::Uniform(Arc::new(UniformScorer { vocab_size }))
        }
        ("sentiment", None) => MockHandle::Sentiment(Arc::new(SentimentMock::with_mask_token(
            endpoints.mask_token.clone(),
        ))),
        ("flat", None) => MockHandle::Flat(Arc::new(FlatMock::with_mask_token(endpoints.mask_token.clone()))),
        ("hash", arg) => {
            let dim = match arg {
                Some(a) => a.parse().ok().filter(|d| *d >= 1).ok_or_else(bad)?,
                None => HashEmbedder::default().dim,
            };
            MockHandle::Hash(Arc::new(HashEmbedder { dim }))
        }
        _ => return Err(bad()),
    };
    Ok(Some(handle))
}

impl MockHandle {
    fn unsupported(&self, service: &str) -> BackendError {
        BackendError::InvalidEndpoint(format!("mock {} cannot serve {service}", self.name()))
    }

    pub fn name(&self) -> &'static str {
        match self {
            MockHandle::Echo(_) => "echo",
            MockHandle::Lexicon(_) => "lexicon",
            MockHandle::Symbolic(_) => "symbolic",
            MockHandle::Uniform(_) => "uniform",
            MockHandle::Sentiment(_) => "sentiment",
            MockHandle::Flat(_) => "flat",
            MockHandle::Hash(_) => "hash",
        }
    }

    pub fn generator(&self) -> Result<Arc<dyn Generator>, BackendError> {
        match self {
            MockHandle::Echo(m) => Ok(m.clone()),
            MockHandle::Lexicon(m) => Ok(m.clone()),
            MockHandle::Symbolic(m) => Ok(m.clone()),
            _ => Err(self.unsupported("completion")),
        }
    }

    pub fn scorer(&self) -> Result<Arc<dyn TokenScorer>, BackendError> {
        match self {
            MockHandle::Uniform(m) => Ok(m.clone()),
            MockHandle::Lexicon(m) => Ok(m.clone()),
            _ => Err(self.unsupported("token scoring")),
        }
    }

    pub fn mask_filler(&self) -> Result<Arc<dyn MaskFiller>, BackendError> {
        match self {
            MockHandle::Sentiment(m) => Ok(m.clone()),
            MockHandle::Flat(m) => Ok(m.clone()),
            _ => Err(self.unsupported("mask filling")),
        }
    }

    pub fn classifier(&self) -> Result<Arc<dyn Classifier>, BackendError> {
        match self {
            MockHandle::Sentiment(m) => Ok(m.clone()),
            MockHandle::Flat(m) => Ok(m.clone()),
            _ => Err(self.unsupported("classification")),
        }
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, BackendError> {
        match self {
            MockHandle::Hash(m) => Ok(m.clone()),
            _ => Err(self.unsupported("embedding")),
        }
    }
}
