use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{builtin_delimiters, DelimiterPair, PromptError, Template, TemplateKind};

/// Templates and delimiters available to a run: the built-ins plus any
/// loaded from a TOML document such as
///
/// ```toml
/// [templates]
/// polite = "Original: {d1}{x}{d2} Rewritten more {s2}ly: {d1}"
///
/// [delimiters]
/// pipe = { open = "|", close = "|" }
/// triple-angle = { open = "⟨⟨⟨", close = "⟩⟩⟩" }
/// ```
///
/// Entries whose name matches a built-in replace it.
#[derive(Debug, Clone)]
pub struct PromptConfig {
    templates: Vec<Template>,
    delimiters: Vec<DelimiterPair>,
}

#[derive(Deserialize)]
struct RawConfig {
    #[serde(default)]
    templates: BTreeMap<String, String>,
    #[serde(default)]
    delimiters: BTreeMap<String, RawPair>,
}

#[derive(Deserialize)]
struct RawPair {
    open: String,
    close: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            templates: TemplateKind::ALL.iter().map(|k| k.template()).collect(),
            delimiters: builtin_delimiters(),
        }
    }
}

impl PromptConfig {
    pub fn from_toml_str(doc: &str) -> Result<Self, PromptError> {
        let raw: RawConfig = toml::from_str(doc).map_err(|e| PromptError::Config(e.to_string()))?;
        let mut cfg = Self::default();
        for (name, pattern) in raw.templates {
            let t = Template::parse(name, pattern)?;
            match cfg.templates.iter_mut().find(|x| x.name() == t.name()) {
                Some(slot) => *slot = t,
                None => cfg.templates.push(t),
            }
        }
        for (name, pair) in raw.delimiters {
            let d = DelimiterPair::new(name, pair.open, pair.close)?;
            match cfg.delimiters.iter_mut().find(|x| x.name() == d.name()) {
                Some(slot) => *slot = d,
                None => cfg.delimiters.push(d),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let doc = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&doc)
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn delimiters(&self) -> &[DelimiterPair] {
        &self.delimiters
    }

    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name() == name)
    }

    pub fn delimiter(&self, name: &str) -> Option<&DelimiterPair> {
        self.delimiters.iter().find(|d| d.name() == name)
    }
}
