use serde::{Deserialize, Serialize};

use crate::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Attention seq2seq that ignores the target EPA.
    Seq2seqPlain,
    /// Attention seq2seq with the target EPA appended to every encoder input.
    Seq2seqEpa,
    Cvae,
}

impl Variant {
    pub fn is_seq2seq(self) -> bool {
        matches!(self, Self::Seq2seqPlain | Self::Seq2seqEpa)
    }
}

impl std::str::FromStr for Variant {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq2seq_plain" => Ok(Self::Seq2seqPlain),
            "seq2seq_epa" => Ok(Self::Seq2seqEpa),
            "cvae" => Ok(Self::Cvae),
            other => Err(NeuralError::Config(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Seq2seqPlain => "seq2seq_plain",
            Self::Seq2seqEpa => "seq2seq_epa",
            Self::Cvae => "cvae",
        })
    }
}

pub const EPA_DIM: usize = 3;

/// Model shape. Larger settings (300-d pretrained embeddings, 24000 words)
/// are accepted but embeddings are always randomly initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub latent_dim: usize,
    pub epa_dim: usize,
    pub variant: Variant,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, vocab_size: usize) -> Self {
        Self {
            embed_dim: 64,
            hidden_dim: 64,
            vocab_size,
            max_len: 20,
            latent_dim: 32,
            epa_dim: EPA_DIM,
            variant,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
            ("latent_dim", self.latent_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(NeuralError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_size <= crate::vocab::UNK {
            return Err(NeuralError::Config(
                "vocab_size must exceed the reserved ids".into(),
            ));
        }
        if self.epa_dim != EPA_DIM {
            return Err(NeuralError::Config(format!("epa_dim must be {EPA_DIM}")));
        }
        Ok(())
    }
}

/// Linear KL weight ramp: `min(1, step / warmup_steps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub warmup_steps: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { warmup_steps: 5000 }
    }
}

impl AnnealSchedule {
    pub fn new(warmup_steps: u64) -> Result<Self, NeuralError> {
        if warmup_steps == 0 {
            return Err(NeuralError::Config(
                "warmup_steps must be at least 1".into(),
            ));
        }
        Ok(Self { warmup_steps })
    }

    pub fn weight(&self, step: u64) -> f64 {
        (step as f64 / self.warmup_steps as f64).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Beam,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub beam_width: usize,
    pub max_len: usize,
    /// When set, the CVAE samples its latent instead of using the prior mean.
    pub seed: Option<u64>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Greedy,
            beam_width: 1,
            max_len: 20,
            seed: None,
        }
    }
}

impl DecodeConfig {
    pub fn beam(width: usize) -> Self {
        Self {
            mode: DecodeMode::Beam,
            beam_width: width,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.beam_width == 0 {
            return Err(NeuralError::Config("beam_width must be at least 1".into()));
        }
        if self.max_len == 0 {
            return Err(NeuralError::Config("max_len must be at least 1".into()));
        }
        Ok(())
    }
}
