use std::collections::HashMap;

use actgen_core::text::tokenize;
use serde::{Deserialize, Serialize};

use crate::NeuralError;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token to id mapping with four reserved ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    max_size: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    max_size: usize,
    tokens: Vec<String>,
}

impl From<Vocab> for VocabFile {
    fn from(v: Vocab) -> Self {
        Self {
            max_size: v.max_size,
            tokens: v.tokens,
        }
    }
}

impl TryFrom<VocabFile> for Vocab {
    type Error = NeuralError;

    fn try_from(f: VocabFile) -> Result<Self, Self::Error> {
        Vocab::from_tokens(f.tokens, f.max_size)
    }
}

impl Vocab {
    /// Builds from token frequencies: most frequent first, ties by token.
    /// `max_size` counts the reserved ids.
    pub fn build<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        max_size: usize,
    ) -> Result<Self, NeuralError> {
        if max_size <= RESERVED.len() {
            return Err(NeuralError::Config(format!(
                "vocabulary max size {max_size} leaves no room past the reserved ids"
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            if !RESERVED.contains(&t) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let all = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .take(max_size)
            .collect();
        Self::from_tokens(all, max_size)
    }

    /// Builds from sentences using the shared tokenizer.
    pub fn from_sentences<'a>(
        sentences: impl IntoIterator<Item = &'a str>,
        max_size: usize,
    ) -> Result<Self, NeuralError> {
        let tokens: Vec<String> = sentences.into_iter().flat_map(tokenize).collect();
        Self::build(tokens.iter().map(String::as_str), max_size)
    }

    /// Rebuilds from an id-ordered token list that starts with the reserved
    /// tokens.
    pub fn from_tokens(tokens: Vec<String>, max_size: usize) -> Result<Self, NeuralError> {
        if tokens.len() < RESERVED.len() || tokens[..4].iter().ne(RESERVED.iter()) {
            return Err(NeuralError::Config(
                "vocabulary must start with the reserved tokens".into(),
            ));
        }
        if tokens.len() > max_size {
            return Err(NeuralError::Config(format!(
                "vocabulary has {} tokens, max {max_size}",
                tokens.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(NeuralError::Config(format!("duplicate token '{t}'")));
            }
        }
        Ok(Self {
            tokens,
            index,
            max_size,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokenizes `text`, keeping at most `max_len` ids.
    pub fn encode(&self, text: &str, max_len: usize) -> TokenSeq {
        let ids = tokenize(text)
            .iter()
            .take(max_len)
            .map(|t| self.id(t))
            .collect();
        TokenSeq {
            ids,
            surface: text.to_string(),
        }
    }

    /// Joins tokens up to the first EOS, dropping PAD and BOS.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id != PAD && id != BOS)
            .filter_map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Token ids together with the text they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub ids: Vec<usize>,
    pub surface: String,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
