use std::collections::HashMap;

use actgen_core::lexicon::{surface_label, EntryKind, Lexicon};
use actgen_core::{EpaVector, Scalar};

use crate::NeuralError;

pub const DEFAULT_TEMPLATE: &str = "i would {label} you";

/// Deterministic fallback: names the behavior nearest to the target EPA.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateGenerator {
    default: String,
    by_label: HashMap<String, String>,
}

impl Default for TemplateGenerator {
    fn default() -> Self {
        Self {
            default: DEFAULT_TEMPLATE.into(),
            by_label: HashMap::new(),
        }
    }
}

impl TemplateGenerator {
    /// Every template must contain `{label}`.
    pub fn new(
        default: impl Into<String>,
        by_label: HashMap<String, String>,
    ) -> Result<Self, NeuralError> {
        let default = default.into();
        for t in std::iter::once(&default).chain(by_label.values()) {
            if !t.contains("{label}") {
                return Err(NeuralError::Config(format!(
                    "template '{t}' has no {{label}} slot"
                )));
            }
        }
        Ok(Self { default, by_label })
    }

    /// Nearest behavior label to `alpha` (underscored form).
    pub fn choose_label<T: Scalar>(
        &self,
        alpha: &EpaVector<T>,
        lexicon: &Lexicon<T>,
    ) -> Result<String, NeuralError> {
        lexicon
            .nearest_labels(EntryKind::Behavior, *alpha, 1)
            .map_err(|e| NeuralError::Config(e.to_string()))?
            .into_iter()
            .next()
            .map(|m| m.label)
            .ok_or_else(|| NeuralError::Config("lexicon has no behaviors".into()))
    }

    pub fn generate<T: Scalar>(
        &self,
        alpha: &EpaVector<T>,
        lexicon: &Lexicon<T>,
    ) -> Result<String, NeuralError> {
        let label = self.choose_label(alpha, lexicon)?;
        let template = self.by_label.get(&label).unwrap_or(&self.default);
        Ok(template.replace("{label}", &surface_label(&label)))
    }
}
