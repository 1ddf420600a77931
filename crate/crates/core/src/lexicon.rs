//! Culture lexicons: identities, behaviors and modifiers with EPA ratings.
//!
//! On disk a lexicon is a UTF-8 CSV with header `label,kind,e,p,a`. Labels
//! never contain commas; multi-word labels use underscores (`confer_with`).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epa::{validate_epa, EpaVector};
use crate::Scalar;

pub const LEXICON_HEADER: [&str; 5] = ["label", "kind", "e", "p", "a"];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate {kind} entry '{label}'")]
    Duplicate { kind: EntryKind, label: String },
    #[error("lexicon has {available} {kind} entries, {requested} requested")]
    Size {
        kind: EntryKind,
        available: usize,
        requested: usize,
    },
    #[error("unknown {kind} label '{label}'")]
    UnknownLabel { kind: EntryKind, label: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Identity,
    Behavior,
    Modifier,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Identity => "identity",
            EntryKind::Behavior => "behavior",
            EntryKind::Modifier => "modifier",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(EntryKind::Identity),
            "behavior" => Ok(EntryKind::Behavior),
            "modifier" => Ok(EntryKind::Modifier),
            other => Err(format!("unknown kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry<T> {
    pub label: String,
    pub epa: EpaVector<T>,
    pub kind: EntryKind,
}

/// A label with its distance to a query point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelMatch<T> {
    pub label: String,
    pub distance: T,
}

/// Immutable collection of lexicon entries indexed by `(kind, label)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon<T> {
    entries: Vec<LexiconEntry<T>>,
    index: HashMap<(EntryKind, String), usize>,
}

impl<T: Scalar> Default for Lexicon<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Scalar> Lexicon<T> {
    pub fn from_entries(
        entries: impl IntoIterator<Item = LexiconEntry<T>>,
    ) -> Result<Self, LexiconError> {
        let mut lex = Self::default();
        for entry in entries {
            lex.insert(entry)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, entry: LexiconEntry<T>) -> Result<(), LexiconError> {
        let key = (entry.kind, entry.label.clone());
        if self.index.contains_key(&key) {
            return Err(LexiconError::Duplicate {
                kind: entry.kind,
                label: entry.label,
            });
        }
        self.index.insert(key, self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    /// Parses the project CSV format.
    pub fn load<R: Read>(source: R) -> Result<Self, LexiconError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(LEXICON_HEADER.iter().copied()) {
            return Err(LexiconError::Parse {
                line: 1,
                message: format!("expected header '{}'", LEXICON_HEADER.join(",")),
            });
        }

        let mut lex = Self::default();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |message: String| LexiconError::Parse { line, message };
            if record.len() != LEXICON_HEADER.len() {
                return Err(parse_err(format!(
                    "expected 5 columns, found {}",
                    record.len()
                )));
            }
            let label = record[0].to_string();
            if label.is_empty() {
                return Err(parse_err("empty label".into()));
            }
            let kind: EntryKind = record[1].parse().map_err(parse_err)?;
            let mut raw = [T::zero(); 3];
            for (slot, field) in raw.iter_mut().zip(record.iter().skip(2)) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(format!("non-numeric EPA value '{field}'")))?;
                *slot = T::lit(v);
            }
            let epa = validate_epa(raw).map_err(|e| parse_err(e.to_string()))?.epa;
            lex.insert(LexiconEntry { label, epa, kind })?;
        }
        Ok(lex)
    }

    pub fn load_str(source: &str) -> Result<Self, LexiconError> {
        Self::load(source.as_bytes())
    }

    /// Writes the CSV form; values use the shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), LexiconError> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(LEXICON_HEADER)?;
        for entry in &self.entries {
            let [e, p, a] = entry.epa.to_f64();
            writer.write_record([
                entry.label.as_str(),
                entry.kind.as_str(),
                &e.to_string(),
                &p.to_string(),
                &a.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("lexicon labels are UTF-8")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry<T>] {
        &self.entries
    }

    pub fn of_kind(&self, kind: EntryKind) -> impl Iterator<Item = &LexiconEntry<T>> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    pub fn get(&self, kind: EntryKind, label: &str) -> Option<&LexiconEntry<T>> {
        self.index
            .get(&(kind, label.to_string()))
            .map(|&i| &self.entries[i])
    }

    pub fn epa(&self, kind: EntryKind, label: &str) -> Result<EpaVector<T>, LexiconError> {
        self.get(kind, label)
            .map(|e| e.epa)
            .ok_or_else(|| LexiconError::UnknownLabel {
                kind,
                label: label.to_string(),
            })
    }

    /// The `k` entries of `kind` closest to `query` by Euclidean distance,
    /// ties broken by label.
    pub fn nearest_labels(
        &self,
        kind: EntryKind,
        query: EpaVector<T>,
        k: usize,
    ) -> Result<Vec<LabelMatch<T>>, LexiconError> {
        let mut scored: Vec<LabelMatch<T>> = self
            .of_kind(kind)
            .map(|e| LabelMatch {
                label: e.label.clone(),
                distance: e.epa.distance(query),
            })
            .collect();
        if k == 0 || scored.len() < k {
            return Err(LexiconError::Size {
                kind,
                available: scored.len(),
                requested: k,
            });
        }
        scored.sort_by(|x, y| {
            x.distance
                .partial_cmp(&y.distance)
                .unwrap_or(Ordering::Equal)
                .then_with(|| x.label.cmp(&y.label))
        });
        scored.truncate(k);
        Ok(scored)
    }
}

/// Renders a lexicon label for text (`confer_with` becomes `confer with`).
pub fn surface_label(label: &str) -> String {
    label.replace('_', " ")
}
