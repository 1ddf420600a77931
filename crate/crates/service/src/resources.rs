use std::path::{Path, PathBuf};

use actgen_core::s2epa::{Classifier, RemoteClassifier};
use actgen_core::{
    data, DeflectionWeights, EmojiEpaTable, ImpressionModel, KeywordMap, Lexicon, SentenceToEpa,
};
use actgen_neural::{load_checkpoint, DecodeConfig, Vocab};
use actgen_pipeline::{DialogueEngine, ResponseGenerator};
use serde::{Deserialize, Serialize};

use crate::config::ClassifierStrategy;
use crate::ApiError;

/// Data files; each missing path falls back to the bundled sample data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    /// Culture lexicon CSV (label,kind,e,p,a).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Impression-formation equations JSON.
    #[arg(long)]
    pub equations: Option<PathBuf>,
    /// Emoji EPA table CSV.
    #[arg(long)]
    pub emoji_table: Option<PathBuf>,
    /// Offline keyword map CSV.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
}

impl ResourcePaths {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Path)> {
        [
            ("lexicon", &self.lexicon),
            ("equations", &self.equations),
            ("emoji_table", &self.emoji_table),
            ("keywords", &self.keywords),
        ]
        .into_iter()
        .filter_map(|(name, p)| p.as_deref().map(|p| (name, p)))
    }

    /// Resolves relative paths against `base`.
    pub fn relative_to(mut self, base: &Path) -> Self {
        for p in [
            &mut self.lexicon,
            &mut self.equations,
            &mut self.emoji_table,
            &mut self.keywords,
        ] {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = base.join(&*path);
            }
        }
        self
    }
}

fn read(name: &str, path: &Path) -> Result<String, ApiError> {
    std::fs::read_to_string(path)
        .map_err(|e| ApiError::from(e).with_detail(format!("{name}: {}", path.display())))
}

/// Loaded affect data shared by the CLI and the service.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: Lexicon<f64>,
    pub model: ImpressionModel<f64>,
    pub table: EmojiEpaTable<f64>,
    pub keywords: KeywordMap<f64>,
}

impl Resources {
    pub fn load(paths: &ResourcePaths) -> Result<Self, ApiError> {
        let lexicon = match &paths.lexicon {
            Some(p) => Lexicon::load_str(&read("lexicon", p)?)?,
            None => data::sample_lexicon(),
        };
        let model = match &paths.equations {
            Some(p) => ImpressionModel::parse_str(&read("equations", p)?)?,
            None => data::sample_equations(),
        };
        let table = match &paths.emoji_table {
            Some(p) => EmojiEpaTable::load_str(&read("emoji_table", p)?)?,
            None => data::emoji_table(),
        };
        let keywords = match &paths.keywords {
            Some(p) => KeywordMap::load_str(&read("keywords", p)?, &table)?,
            None => data::keyword_map(),
        };
        Ok(Self {
            lexicon,
            model,
            table,
            keywords,
        })
    }

    pub fn s2epa(&self, strategy: &ClassifierStrategy) -> Result<SentenceToEpa<f64>, ApiError> {
        let s2epa = match strategy {
            ClassifierStrategy::Offline => {
                SentenceToEpa::offline(self.table.clone(), self.keywords.clone())
            }
            ClassifierStrategy::Remote(endpoint) => SentenceToEpa {
                table: self.table.clone(),
                classifier: Classifier::Remote(RemoteClassifier::new(endpoint.clone())?),
                lexicon: None,
            },
        };
        Ok(s2epa.with_lexicon(self.lexicon.clone()))
    }

    pub fn engine(&self, strategy: &ClassifierStrategy) -> Result<DialogueEngine, ApiError> {
        Ok(DialogueEngine::new(
            self.lexicon.clone(),
            self.model.clone(),
            DeflectionWeights::ones(),
            self.s2epa(strategy)?,
        ))
    }
}

/// Vocabulary file stored beside a checkpoint manifest: `model.json` pairs
/// with `model.vocab.json`.
pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("vocab.json")
}

/// Checkpoint plus its vocabulary as a session generator.
pub fn load_generator(
    checkpoint: &Path,
    decode: DecodeConfig,
) -> Result<ResponseGenerator, ApiError> {
    decode.validate()?;
    let (network, _) = load_checkpoint::<f32>(checkpoint)
        .map_err(|e| ApiError::from(e).with_detail(checkpoint.display().to_string()))?;
    let vpath = vocab_path(checkpoint);
    let vocab: Vocab = serde_json::from_str(&read("vocab", &vpath)?)?;
    if vocab.len() != network.config().vocab_size {
        return Err(ApiError::bad_request(format!(
            "vocabulary has {} tokens but the checkpoint expects {}",
            vocab.len(),
            network.config().vocab_size
        )));
    }
    Ok(ResponseGenerator::Neural {
        network,
        vocab,
        decode,
    })
}
