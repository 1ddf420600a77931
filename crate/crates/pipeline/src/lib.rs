//! Corpus ingestion, triple construction, the interactive dialogue loop and
//! automatic evaluation.

pub mod dataset;
pub mod dialogue;
pub mod eval;
pub mod ingest;
pub mod synthetic;
pub mod triples;

pub use dataset::{load_dataset, persist_dataset, DatasetSplit, SplitFractions};
pub use dialogue::{
    open_session, respond, DialogueEngine, GeneratorChoice, IdentitySetting, ResponseGenerator,
    SessionState, Speaker, TurnAnnotation,
};
pub use eval::{
    export_rating_sheet, round_trip_alignment, wilcoxon_signed_rank, AlignmentReport, RatingPair,
    WilcoxonMethod, WilcoxonResult,
};
pub use ingest::{build_vocab, parse_corpus, Conversation, CorpusReport, CorpusSource};
pub use triples::{construct_triples, Role, TrainingTriple, TripleReport};

use actgen_core::{ActError, LexiconError, S2epaError};
use actgen_neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("all score differences are zero")]
    Degenerate,
    #[error("solver error: {0}")]
    Solver(#[from] ActError),
    #[error("sentence mapping error: {0}")]
    S2epa(#[from] S2epaError),
    #[error("generator error: {0}")]
    Generator(#[from] NeuralError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
