//! Affect control core: EPA vectors, culture lexicons, impression formation
//! and deflection minimization, and the sentence-to-EPA mapping.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the rest of the workspace uses
//! for affect math.

pub mod act;
pub mod data;
pub mod epa;
pub mod lexicon;
pub mod s2epa;
mod scalar;
pub mod text;

pub use act::{
    deflection, optimal_behavior, simulate_dyad, step_dyad, ActError, DeflectionWeights, EventABO,
    Identity, ImpressionModel, InteractionState, OptimalBehavior, Party, TermSpec, TraceRow,
};
pub use epa::{validate_epa, EpaError, EpaVector, Role, StateVector9, ValidatedEpa, EPA_LIMIT};
pub use lexicon::{surface_label, EntryKind, LabelMatch, Lexicon, LexiconEntry, LexiconError};
pub use s2epa::{
    combine_distribution, EmojiDistribution, EmojiEpaTable, KeywordMap, S2epaError, SentenceToEpa,
};
pub use scalar::Scalar;

pub type Epa = EpaVector<f64>;
pub type Epa32 = EpaVector<f32>;
pub type State9 = StateVector9<f64>;
pub type Model = ImpressionModel<f64>;
pub type Weights = DeflectionWeights<f64>;
pub type Interaction = InteractionState<f64>;
pub type Lex = Lexicon<f64>;
pub type EmojiTable = EmojiEpaTable<f64>;
pub type S2epa = SentenceToEpa<f64>;
