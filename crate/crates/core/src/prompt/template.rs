use std::fmt;

use serde::{Deserialize, Serialize};

use super::PromptError;

/// The four built-in prompt phrasings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    Vanilla,
    Contrastive,
    NegationV1,
    NegationV2,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [
        TemplateKind::Vanilla,
        TemplateKind::Contrastive,
        TemplateKind::NegationV1,
        TemplateKind::NegationV2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Vanilla => "vanilla",
            TemplateKind::Contrastive => "contrastive",
            TemplateKind::NegationV1 => "negation-v1",
            TemplateKind::NegationV2 => "negation-v2",
        }
    }

    pub fn pattern(self) -> &'static str {
        match self {
            TemplateKind::Vanilla => {
                "Here is a text: {d1}{x}{d2} Here is a rewrite of the text, which is {s2}: {d1}"
            }
            TemplateKind::Contrastive => {
                "Here is a text, which is {s1}: {d1}{x}{d2} Here is a rewrite of the text, which is {s2}: {d1}"
            }
            TemplateKind::NegationV1 => {
                "Here is a text, which is {s1}: {d1}{x}{d2} Here is a rewrite of the text, which is not {s1}: {d1}"
            }
            TemplateKind::NegationV2 => {
                "Here is a text, which is not {s2}: {d1}{x}{d2} Here is a rewrite of the text, which is {s2}: {d1}"
            }
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn template(self) -> Template {
        Template::parse(self.name(), self.pattern()).expect("built-in patterns are valid")
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    SourceStyle,
    TargetStyle,
    Input,
    Open,
    Close,
}

impl Slot {
    const ALL: [(&'static str, Slot); 5] = [
        ("{s1}", Slot::SourceStyle),
        ("{s2}", Slot::TargetStyle),
        ("{x}", Slot::Input),
        ("{d1}", Slot::Open),
        ("{d2}", Slot::Close),
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Segment {
    Literal(String),
    Slot(Slot),
}

/// A named prompt phrasing with `{s1} {s2} {x} {d1} {d2}` placeholders.
///
/// A valid pattern holds exactly one `{x}` and ends with `{d1}`, which is
/// where generation picks up. Anything that is not one of the five
/// placeholders is copied literally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate", into = "RawTemplate")]
pub struct Template {
    name: String,
    pattern: String,
    #[serde(skip)]
    segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct RawTemplate {
    name: String,
    pattern: String,
}

impl TryFrom<RawTemplate> for Template {
    type Error = PromptError;

    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        Template::parse(raw.name, raw.pattern)
    }
}

impl From<Template> for RawTemplate {
    fn from(t: Template) -> Self {
        RawTemplate {
            name: t.name,
            pattern: t.pattern,
        }
    }
}

impl Template {
    pub fn parse(name: impl Into<String>, pattern: impl Into<String>) -> Result<Self, PromptError> {
        let name = name.into();
        let pattern = pattern.into();
        let segments = split_segments(&pattern);

        let inputs = segments
            .iter()
            .filter(|s| **s == Segment::Slot(Slot::Input))
            .count();
        if inputs != 1 {
            return Err(PromptError::InvalidTemplate {
                name,
                reason: format!("expected exactly one {{x}} placeholder, found {inputs}"),
            });
        }
        if segments.last() != Some(&Segment::Slot(Slot::Open)) {
            return Err(PromptError::InvalidTemplate {
                name,
                reason: "pattern must end with {d1}".into(),
            });
        }
        Ok(Self {
            name,
            pattern,
            segments,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub(crate) fn segments(&self) -> &[Segment] {
        &self.segments
    }
}

impl From<TemplateKind> for Template {
    fn from(kind: TemplateKind) -> Self {
        kind.template()
    }
}

fn split_segments(pattern: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = pattern;
    'outer: while let Some(c) = rest.chars().next() {
        if c == '{' {
            for (token, slot) in Slot::ALL {
                if let Some(tail) = rest.strip_prefix(token) {
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(slot));
                    rest = tail;
                    continue 'outer;
                }
            }
        }
        literal.push(c);
        rest = &rest[c.len_utf8()..];
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}
