//! Prompt rendering and completion extraction.
//!
//! A [`TransferRequest`] bundles the text to rewrite, its source and target
//! styles, a [`Template`] and a [`DelimiterPair`]. [`render_prompt`] turns it
//! into a prefix that ends with the opening delimiter, and
//! [`extract_completion`] cuts the model's continuation back at the first
//! closing delimiter.

mod config;
mod delimiter;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::PromptConfig;
pub use delimiter::{builtin_delimiters, delimiter_by_name, DelimiterKind, DelimiterPair};
pub use template::{Template, TemplateKind};

use template::{Segment, Slot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("style label must not be empty")]
    EmptyStyle,
    #[error("input text must not be empty")]
    EmptyInput,
    #[error("{0}")]
    InvalidDelimiter(String),
    #[error("template `{name}` is invalid: {reason}")]
    InvalidTemplate { name: String, reason: String },
    #[error("delimiter collision: {field} contains the closing marker `{close}`")]
    DelimiterCollision { field: String, close: String },
    #[error("exemplar {index} goes {found}, but the request goes {expected}")]
    DirectionMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("prompt config: {0}")]
    Config(String),
}

/// A free-text style descriptor such as `positive` or `formal`.
///
/// A negated label renders as `not <name>`; in serialized form that prefix
/// is how negation is carried.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StyleLabel {
    name: String,
    negated: bool,
}

impl StyleLabel {
    pub fn new(name: impl AsRef<str>) -> Result<Self, PromptError> {
        let name = name.as_ref().trim();
        if name.is_empty() {
            return Err(PromptError::EmptyStyle);
        }
        Ok(Self {
            name: name.to_string(),
            negated: false,
        })
    }

    pub fn negated(name: impl AsRef<str>) -> Result<Self, PromptError> {
        Ok(Self {
            negated: true,
            ..Self::new(name)?
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn render(&self) -> String {
        if self.negated {
            format!("not {}", self.name)
        } else {
            self.name.clone()
        }
    }
}

impl fmt::Display for StyleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        f.write_str(&self.name)
    }
}

impl FromStr for StyleLabel {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().strip_prefix("not ") {
            Some(rest) => StyleLabel::negated(rest),
            None => StyleLabel::new(s),
        }
    }
}

impl TryFrom<String> for StyleLabel {
    type Error = PromptError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StyleLabel> for String {
    fn from(label: StyleLabel) -> Self {
        label.to_string()
    }
}

/// One few-shot demonstration rendered ahead of the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
    pub source_style: StyleLabel,
    pub target_style: StyleLabel,
}

impl Exemplar {
    pub fn new(
        input: impl Into<String>,
        output: impl Into<String>,
        source_style: StyleLabel,
        target_style: StyleLabel,
    ) -> Result<Self, PromptError> {
        let (input, output) = (input.into(), output.into());
        if input.trim().is_empty() || output.trim().is_empty() {
            return Err(PromptError::EmptyInput);
        }
        Ok(Self {
            input,
            output,
            source_style,
            target_style,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRequest {
    pub input_text: String,
    pub source_style: StyleLabel,
    pub target_style: StyleLabel,
    pub template: Template,
    pub delimiter: DelimiterPair,
    #[serde(default)]
    pub exemplars: Vec<Exemplar>,
}

impl TransferRequest {
    pub fn new(
        input_text: impl Into<String>,
        source_style: StyleLabel,
        target_style: StyleLabel,
        template: impl Into<Template>,
        delimiter: DelimiterPair,
    ) -> Self {
        Self {
            input_text: input_text.into(),
            source_style,
            target_style,
            template: template.into(),
            delimiter,
            exemplars: Vec::new(),
        }
    }

    pub fn with_exemplars(mut self, exemplars: Vec<Exemplar>) -> Self {
        self.exemplars = exemplars;
        self
    }

    pub fn direction(&self) -> String {
        direction_label(&self.source_style, &self.target_style)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.input_text.trim().is_empty() {
            return Err(PromptError::EmptyInput);
        }
        let close = self.delimiter.close();
        let collision = |field: String| PromptError::DelimiterCollision {
            field,
            close: close.to_string(),
        };
        if self.input_text.contains(close) {
            return Err(collision("input text".into()));
        }
        for (i, ex) in self.exemplars.iter().enumerate() {
            if ex.source_style != self.source_style || ex.target_style != self.target_style {
                return Err(PromptError::DirectionMismatch {
                    index: i,
                    expected: self.direction(),
                    found: direction_label(&ex.source_style, &ex.target_style),
                });
            }
            if ex.input.contains(close) {
                return Err(collision(format!("exemplar {i} input")));
            }
            if ex.output.contains(close) {
                return Err(collision(format!("exemplar {i} output")));
            }
        }
        Ok(())
    }
}

/// `source->target`, as used in sweep tables and manifests.
pub fn direction_label(source: &StyleLabel, target: &StyleLabel) -> String {
    format!("{source}->{target}")
}

fn render_block(
    template: &Template,
    delimiter: &DelimiterPair,
    input: &str,
    source: &StyleLabel,
    target: &StyleLabel,
    out: &mut String,
) {
    for segment in template.segments() {
        match segment {
            Segment::Literal(text) => out.push_str(text),
            Segment::Slot(Slot::SourceStyle) => out.push_str(&source.render()),
            Segment::Slot(Slot::TargetStyle) => out.push_str(&target.render()),
            Segment::Slot(Slot::Input) => out.push_str(input),
            Segment::Slot(Slot::Open) => out.push_str(delimiter.open()),
            Segment::Slot(Slot::Close) => out.push_str(delimiter.close()),
        }
    }
}

/// Renders the full prompt. Few-shot exemplars come first, each completed
/// with its output and the closing marker, one block per line.
pub fn render_prompt(req: &TransferRequest) -> Result<String, PromptError> {
    req.validate()?;
    let mut out = String::new();
    for ex in &req.exemplars {
        render_block(
            &req.template,
            &req.delimiter,
            &ex.input,
            &ex.source_style,
            &ex.target_style,
            &mut out,
        );
        out.push_str(&ex.output);
        out.push_str(req.delimiter.close());
        out.push('\n');
    }
    render_block(
        &req.template,
        &req.delimiter,
        &req.input_text,
        &req.source_style,
        &req.target_style,
        &mut out,
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub text: String,
    /// The closing marker never appeared in the raw continuation.
    pub unterminated: bool,
}

/// Cuts a raw continuation at the first closing marker and trims it.
pub fn extract_completion(raw: &str, delimiter: &DelimiterPair) -> Extraction {
    match raw.find(delimiter.close()) {
        Some(end) => Extraction {
            text: raw[..end].trim().to_string(),
            unterminated: false,
        },
        None => Extraction {
            text: raw.trim().to_string(),
            unterminated: true,
        },
    }
}

pub const CLOZE_MASK_DEFAULT: &str = "<mask>";

/// `The following text is <mask>: [<text>].`
pub fn render_cloze(text: &str, mask_token: &str) -> Result<String, PromptError> {
    if text.trim().is_empty() {
        return Err(PromptError::EmptyInput);
    }
    Ok(format!("The following text is {mask_token}: [{text}]."))
}
