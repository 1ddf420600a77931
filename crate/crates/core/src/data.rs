//! Assets shipped with the crate.
//!
//! The emoji table, keyword map, lexicon and equation set are project-authored
//! approximations for demos and tests. Empirical lexicons and equation sets
//! can be loaded from files in the same formats.

use crate::act::ImpressionModel;
use crate::lexicon::Lexicon;
use crate::s2epa::{EmojiEpaTable, KeywordMap};
use crate::Scalar;

pub const EMOJI_TABLE_CSV: &str = include_str!("../data/emoji_epa.csv");
pub const KEYWORDS_CSV: &str = include_str!("../data/keywords.csv");
pub const SAMPLE_LEXICON_CSV: &str = include_str!("../data/sample_lexicon.csv");
pub const SAMPLE_EQUATIONS_JSON: &str = include_str!("../data/sample_equations.json");

pub fn emoji_table<T: Scalar>() -> EmojiEpaTable<T> {
    EmojiEpaTable::load_str(EMOJI_TABLE_CSV).expect("shipped emoji table is valid")
}

pub fn keyword_map<T: Scalar>() -> KeywordMap<T> {
    KeywordMap::load_str(KEYWORDS_CSV, &emoji_table()).expect("shipped keyword map is valid")
}

pub fn sample_lexicon<T: Scalar>() -> Lexicon<T> {
    Lexicon::load_str(SAMPLE_LEXICON_CSV).expect("shipped lexicon is valid")
}

pub fn sample_equations<T: Scalar>() -> ImpressionModel<T> {
    ImpressionModel::parse_str(SAMPLE_EQUATIONS_JSON).expect("shipped equations are valid")
}
