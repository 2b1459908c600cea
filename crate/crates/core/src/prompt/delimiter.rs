use serde::{Deserialize, Serialize};

use super::PromptError;

/// Whether the opening and closing markers of a pair are the same string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelimiterKind {
    Indistinguishable,
    Complementary,
}

/// Opening and closing markers that bound a text inside a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDelimiter", into = "RawDelimiter")]
pub struct DelimiterPair {
    name: String,
    open: String,
    close: String,
}

#[derive(Serialize, Deserialize)]
struct RawDelimiter {
    name: String,
    open: String,
    close: String,
}

impl TryFrom<RawDelimiter> for DelimiterPair {
    type Error = PromptError;

    fn try_from(raw: RawDelimiter) -> Result<Self, Self::Error> {
        DelimiterPair::new(raw.name, raw.open, raw.close)
    }
}

impl From<DelimiterPair> for RawDelimiter {
    fn from(d: DelimiterPair) -> Self {
        RawDelimiter {
            name: d.name,
            open: d.open,
            close: d.close,
        }
    }
}

impl DelimiterPair {
    pub fn new(
        name: impl Into<String>,
        open: impl Into<String>,
        close: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let (name, open, close) = (name.into(), open.into(), close.into());
        if open.is_empty() || close.is_empty() {
            return Err(PromptError::InvalidDelimiter(format!(
                "delimiter `{name}` needs non-empty open and close markers"
            )));
        }
        Ok(Self { name, open, close })
    }

    /// Short name used on the command line and in sweep tables.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn open(&self) -> &str {
        &self.open
    }

    pub fn close(&self) -> &str {
        &self.close
    }

    pub fn kind(&self) -> DelimiterKind {
        if self.open == self.close {
            DelimiterKind::Indistinguishable
        } else {
            DelimiterKind::Complementary
        }
    }
}

const BUILTIN: [(&str, &str, &str); 10] = [
    ("curly", "{", "}"),
    ("square", "[", "]"),
    ("angle", "<", ">"),
    ("paren", "(", ")"),
    ("quote", "\"", "\""),
    ("dash", "--", "--"),
    ("triple-angle", "<<<", ">>>"),
    ("blockquote", "> \"", "\""),
    ("bullet", "* \"", "\""),
    ("liquid", "{{", "}}"),
];

/// The ten built-in delimiter pairs, in their canonical order.
///
/// `quote` and `dash` are indistinguishable; the rest are complementary.
/// `blockquote`, `bullet` and `liquid` mimic Markdown blockquotes, bullet
/// points and liquid tags. Angle brackets are rendered in ASCII.
pub fn builtin_delimiters() -> Vec<DelimiterPair> {
    BUILTIN
        .iter()
        .map(|&(name, open, close)| DelimiterPair {
            name: name.to_string(),
            open: open.to_string(),
            close: close.to_string(),
        })
        .collect()
}

/// Looks up a built-in pair by its short name.
pub fn delimiter_by_name(name: &str) -> Option<DelimiterPair> {
    builtin_delimiters().into_iter().find(|d| d.name == name)
}
