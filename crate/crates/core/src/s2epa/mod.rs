//! Sentence to EPA: a 64-way emoji distribution averaged through an
//! emoji-to-EPA table.

mod offline;
mod remote;

use std::collections::HashSet;
use std::io::Read;

use thiserror::Error;

use crate::epa::{validate_epa, EpaVector};
use crate::lexicon::{EntryKind, LabelMatch, Lexicon};
use crate::Scalar;

pub use offline::{KeywordMap, SMOOTHING};
pub use remote::{ClassifierEndpointConfig, RemoteClassifier};

pub const EMOJI_COUNT: usize = 64;
/// Tolerance on the sum of a validated distribution.
pub const DISTRIBUTION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum S2epaError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("emoji table: {0}")]
    Table(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("classifier unavailable: {0}")]
    Unavailable(String),
    #[error("classifier protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// EPA ratings for the 64 classifier emojis, in classifier output order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmojiEpaTable<T> {
    entries: Vec<(String, EpaVector<T>)>,
}

impl<T: Scalar> EmojiEpaTable<T> {
    pub fn new(entries: Vec<(String, EpaVector<T>)>) -> Result<Self, S2epaError> {
        if entries.len() != EMOJI_COUNT {
            return Err(S2epaError::Table(format!(
                "expected {EMOJI_COUNT} entries, found {}",
                entries.len()
            )));
        }
        let mut seen = HashSet::new();
        for (id, epa) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(S2epaError::Table(format!("duplicate emoji id '{id}'")));
            }
            if !epa.is_finite() {
                return Err(S2epaError::Table(format!("non-finite EPA for '{id}'")));
            }
        }
        Ok(Self { entries })
    }

    /// Reads CSV `emoji_id,e,p,a` with exactly 64 data rows.
    pub fn load<R: Read>(source: R) -> Result<Self, S2epaError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(["emoji_id", "e", "p", "a"]) {
            return Err(S2epaError::Table("expected header 'emoji_id,e,p,a'".into()));
        }
        let mut entries = Vec::with_capacity(EMOJI_COUNT);
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 4 {
                return Err(S2epaError::Table(format!(
                    "line {line}: expected 4 columns"
                )));
            }
            let mut v = [0.0f64; 3];
            for (slot, field) in v.iter_mut().zip(record.iter().skip(1)) {
                *slot = field.parse().map_err(|_| {
                    S2epaError::Table(format!("line {line}: non-numeric value '{field}'"))
                })?;
            }
            entries.push((record[0].to_string(), EpaVector::from_f64(v)));
        }
        Self::new(entries)
    }

    pub fn load_str(source: &str) -> Result<Self, S2epaError> {
        Self::load(source.as_bytes())
    }

    pub fn entries(&self) -> &[(String, EpaVector<T>)] {
        &self.entries
    }

    pub fn id(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn epa(&self, index: usize) -> EpaVector<T> {
        self.entries[index].1
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|(e, _)| e == id)
    }

    /// Arithmetic mean of the 64 EPAs.
    pub fn mean(&self) -> EpaVector<T> {
        let n = T::lit(EMOJI_COUNT as f64);
        let sum = self
            .entries
            .iter()
            .fold(EpaVector::zero(), |acc, (_, epa)| acc + *epa);
        sum.scale(T::one() / n)
    }

    /// Componentwise minimum and maximum over the table.
    pub fn bounds(&self) -> (EpaVector<T>, EpaVector<T>) {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for (_, epa) in &self.entries {
            for i in 0..3 {
                lo[i] = lo[i].min(epa[i]);
                hi[i] = hi[i].max(epa[i]);
            }
        }
        (EpaVector::from_array(lo), EpaVector::from_array(hi))
    }
}

/// Probability distribution over the 64 emojis.
#[derive(Debug, Clone, PartialEq)]
pub struct EmojiDistribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> EmojiDistribution<T> {
    /// Requires 64 non-negative finite entries summing to 1 within 1e-6.
    pub fn new(probs: Vec<T>) -> Result<Self, S2epaError> {
        Self::check_entries(&probs)?;
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(DISTRIBUTION_TOL) {
            return Err(S2epaError::Input(format!(
                "distribution sums to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Like [`EmojiDistribution::new`] but renormalizes when the sum is within
    /// `tolerance` of 1.
    pub fn renormalized(probs: Vec<T>, tolerance: T) -> Result<Self, S2epaError> {
        Self::check_entries(&probs)?;
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs() > tolerance {
            return Err(S2epaError::Input(format!(
                "distribution sums to {sum}, outside renormalization tolerance"
            )));
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p / sum).collect(),
        })
    }

    fn check_entries(probs: &[T]) -> Result<(), S2epaError> {
        if probs.len() != EMOJI_COUNT {
            return Err(S2epaError::Input(format!(
                "expected {EMOJI_COUNT} probabilities, found {}",
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < T::zero()) {
            return Err(S2epaError::Input(format!(
                "probability {i} is negative or non-finite"
            )));
        }
        Ok(())
    }

    pub fn one_hot(index: usize) -> Self {
        let mut probs = vec![T::zero(); EMOJI_COUNT];
        probs[index] = T::one();
        Self { probs }
    }

    pub fn uniform() -> Self {
        Self {
            probs: vec![T::one() / T::lit(EMOJI_COUNT as f64); EMOJI_COUNT],
        }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Indices of the `k` most probable emojis, ties by index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }
}

/// Probability-weighted average of the table's EPAs.
pub fn combine_distribution<T: Scalar>(
    dist: &EmojiDistribution<T>,
    table: &EmojiEpaTable<T>,
) -> Result<EpaVector<T>, S2epaError> {
    let raw = dist
        .probs
        .iter()
        .zip(&table.entries)
        .fold(EpaVector::zero(), |acc, (&p, (_, epa))| acc + epa.scale(p));
    validate_epa(raw.to_array())
        .map(|v| v.epa)
        .map_err(|e| S2epaError::Input(e.to_string()))
}

pub enum Classifier<T> {
    Offline(KeywordMap<T>),
    Remote(RemoteClassifier),
}

impl<T: Scalar> Classifier<T> {
    pub fn classify(&self, text: &str) -> Result<EmojiDistribution<T>, S2epaError> {
        match self {
            Classifier::Offline(map) => map.classify(text),
            Classifier::Remote(client) => client.classify(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2epaOutput<T> {
    pub epa: EpaVector<T>,
    /// Most probable emojis with their probabilities.
    pub top_emojis: Vec<(String, T)>,
    /// Closest behavior labels when a lexicon is bound.
    pub nearest: Vec<LabelMatch<T>>,
}

/// Classifier, emoji table and an optional behavior lexicon for diagnostics.
pub struct SentenceToEpa<T> {
    pub table: EmojiEpaTable<T>,
    pub classifier: Classifier<T>,
    pub lexicon: Option<Lexicon<T>>,
}

impl<T: Scalar> SentenceToEpa<T> {
    pub fn offline(table: EmojiEpaTable<T>, keywords: KeywordMap<T>) -> Self {
        Self {
            table,
            classifier: Classifier::Offline(keywords),
            lexicon: None,
        }
    }

    pub fn with_lexicon(mut self, lexicon: Lexicon<T>) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn epa(&self, text: &str) -> Result<EpaVector<T>, S2epaError> {
        if text.trim().is_empty() {
            return Err(S2epaError::Input("empty text".into()));
        }
        let dist = self.classifier.classify(text)?;
        combine_distribution(&dist, &self.table)
    }

    /// Full mapping with diagnostics.
    pub fn map(&self, text: &str) -> Result<S2epaOutput<T>, S2epaError> {
        if text.trim().is_empty() {
            return Err(S2epaError::Input("empty text".into()));
        }
        let dist = self.classifier.classify(text)?;
        let epa = combine_distribution(&dist, &self.table)?;
        let top_emojis = dist
            .top_k(3)
            .into_iter()
            .map(|i| (self.table.id(i).to_string(), dist.probs()[i]))
            .collect();
        let nearest = match &self.lexicon {
            Some(lex) if lex.of_kind(EntryKind::Behavior).count() >= 2 => lex
                .nearest_labels(EntryKind::Behavior, epa, 2)
                .map_err(|e| S2epaError::Config(e.to_string()))?,
            _ => Vec::new(),
        };
        Ok(S2epaOutput {
            epa,
            top_emojis,
            nearest,
        })
    }
}
