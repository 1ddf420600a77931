//! Synthetic affect-template corpus.
//!
//! Every response carries exactly one affect keyword and its α is the offline
//! sentence EPA of that response, so a generator that respects α can only
//! score well by emitting the matching keyword. Prompts are drawn
//! independently of the category and carry no affect signal.

use actgen_core::SentenceToEpa;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::triples::{Role, TrainingTriple};
use crate::PipelineError;

/// Response templates, one affect keyword each. `{o}` is the object slot.
pub const RESPONSE_TEMPLATES: [&str; 10] = [
    "i love the {o}",
    "i hate the {o}",
    "thank you for the {o}",
    "i am sad about the {o}",
    "the {o} is funny",
    "i am scared of the {o}",
    "i am tired of the {o}",
    "i am furious about the {o}",
    "i am sorry about the {o}",
    "i am proud of the {o}",
];

pub const PROMPT_TEMPLATES: [&str; 5] = [
    "what about the {o} ?",
    "tell me about the {o} .",
    "where is the {o} ?",
    "have you heard about the {o} ?",
    "what happened to the {o} ?",
];

/// Affect-neutral under the offline keyword classifier.
pub const OBJECTS: [&str; 12] = [
    "car", "house", "letter", "game", "plan", "movie", "city", "job", "dog", "garden", "book",
    "river",
];

pub const DEFAULT_SIZE: usize = 500;

/// `n` triples with categories cycled in order and prompts and objects drawn
/// from `seed`. Speakers alternate.
pub fn affect_template_corpus(
    s2epa: &SentenceToEpa<f64>,
    n: usize,
    seed: u64,
) -> Result<Vec<TrainingTriple>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let template = RESPONSE_TEMPLATES[i % RESPONSE_TEMPLATES.len()];
            let prompt_obj = OBJECTS.choose(&mut rng).expect("objects nonempty");
            let prompt = PROMPT_TEMPLATES
                .choose(&mut rng)
                .expect("prompts nonempty")
                .replace("{o}", prompt_obj);
            let response_obj = OBJECTS.choose(&mut rng).expect("objects nonempty");
            let response = template.replace("{o}", response_obj);
            let alpha = s2epa.epa(&response)?;
            Ok(TrainingTriple {
                prompt,
                alpha,
                response,
                speaker: Role::for_index(i),
            })
        })
        .collect()
}
