use std::collections::HashMap;
use std::io::Read;

use super::{EmojiDistribution, EmojiEpaTable, S2epaError, EMOJI_COUNT};
use crate::text::tokenize;
use crate::Scalar;

/// Mass added to every emoji before normalizing.
pub const SMOOTHING: f64 = 0.01;

/// Deterministic keyword classifier: each keyword token adds fixed weights to
/// some emojis.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordMap<T> {
    weights: HashMap<String, Vec<(usize, T)>>,
}

impl<T: Scalar> KeywordMap<T> {
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, usize, T)>,
    ) -> Result<Self, S2epaError> {
        let mut weights: HashMap<String, Vec<(usize, T)>> = HashMap::new();
        for (keyword, emoji, w) in entries {
            if emoji >= EMOJI_COUNT {
                return Err(S2epaError::Config(format!(
                    "keyword '{keyword}' points at emoji {emoji}"
                )));
            }
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(S2epaError::Config(format!(
                    "keyword '{keyword}' has invalid weight {w}"
                )));
            }
            weights
                .entry(keyword.to_lowercase())
                .or_default()
                .push((emoji, w));
        }
        Ok(Self { weights })
    }

    /// Reads CSV `keyword,emoji_id,weight`, resolving emoji ids in `table`.
    pub fn load<R: Read>(source: R, table: &EmojiEpaTable<T>) -> Result<Self, S2epaError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(["keyword", "emoji_id", "weight"]) {
            return Err(S2epaError::Config(
                "expected header 'keyword,emoji_id,weight'".into(),
            ));
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(S2epaError::Config(format!(
                    "line {line}: expected 3 columns"
                )));
            }
            let emoji = table.index_of(&record[1]).ok_or_else(|| {
                S2epaError::Config(format!("line {line}: unknown emoji '{}'", &record[1]))
            })?;
            let w: f64 = record[2].parse().map_err(|_| {
                S2epaError::Config(format!("line {line}: bad weight '{}'", &record[2]))
            })?;
            entries.push((record[0].to_string(), emoji, T::lit(w)));
        }
        Self::from_entries(entries)
    }

    pub fn load_str(source: &str, table: &EmojiEpaTable<T>) -> Result<Self, S2epaError> {
        Self::load(source.as_bytes(), table)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.weights.keys().map(String::as_str)
    }

    pub fn weights_of(&self, keyword: &str) -> Option<&[(usize, T)]> {
        self.weights.get(keyword).map(Vec::as_slice)
    }

    /// Sums keyword weights over the tokens of `text`, adds [`SMOOTHING`] to
    /// every emoji and normalizes.
    pub fn classify(&self, text: &str) -> Result<EmojiDistribution<T>, S2epaError> {
        if self.weights.is_empty() {
            return Err(S2epaError::Config("keyword map is empty".into()));
        }
        let mut mass = vec![T::lit(SMOOTHING); EMOJI_COUNT];
        for token in tokenize(text) {
            if let Some(ws) = self.weights.get(&token) {
                for &(emoji, w) in ws {
                    mass[emoji] = mass[emoji] + w;
                }
            }
        }
        let total: T = mass.iter().copied().sum();
        EmojiDistribution::renormalized(mass.into_iter().map(|m| m / total).collect(), T::lit(1e-6))
    }
}
