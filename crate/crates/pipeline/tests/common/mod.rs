#![allow(dead_code)]

use actgen_core::{
    data, optimal_behavior, validate_epa, DeflectionWeights, Epa, EpaVector, Identity,
    ImpressionModel, Role as SlotRole, SentenceToEpa, StateVector9,
};
use actgen_pipeline::{Conversation, Role};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn offline() -> SentenceToEpa<f64> {
    SentenceToEpa::offline(data::emoji_table(), data::keyword_map())
}

pub fn identity(label: &str) -> Identity<f64> {
    Identity::from_lexicon(&data::sample_lexicon(), label).unwrap()
}

const WORDS: [&str; 24] = [
    "i", "you", "love", "hate", "thank", "sorry", "the", "car", "is", "funny", "sad", "what",
    "why", "never", "happy", "tired", "kill", "please", "okay", "scared", "we", "go", "now", "?",
];

pub fn random_conversations(n: usize, seed: u64) -> Vec<Conversation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(2..=7);
            let utterances = (0..len)
                .map(|_| {
                    let words = rng.random_range(1..=6);
                    (0..words)
                        .map(|_| *WORDS.choose(&mut rng).unwrap())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            Conversation {
                id: format!("conv{i:05}"),
                utterances,
            }
        })
        .collect()
}

/// Replays the triple rule without `InteractionState`: transients are tracked
/// by hand and α comes straight from the solver.
pub fn replay_alphas(
    conversations: &[Conversation],
    id1: &Identity<f64>,
    id2: &Identity<f64>,
    s2epa: &SentenceToEpa<f64>,
    model: &ImpressionModel<f64>,
    w: &DeflectionWeights<f64>,
) -> Vec<(Role, Epa)> {
    let mut sorted: Vec<&Conversation> = conversations.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for conv in sorted {
        let (mut t1, mut t2) = (id1.epa, id2.epa);
        for (i, pair) in conv.utterances.windows(2).enumerate() {
            let first = i % 2 == 0;
            let (speaker_f, listener_f) = if first {
                (id1.epa, id2.epa)
            } else {
                (id2.epa, id1.epa)
            };
            let (ts, tl) = if first { (t1, t2) } else { (t2, t1) };
            let u = validate_epa(s2epa.epa(&pair[0]).unwrap().to_array())
                .unwrap()
                .epa;
            let post =
                model.form_impression(&StateVector9::from_parts(ts, u, tl, SlotRole::Transient));
            let (ts, tl) = (post.actor(), post.object());
            if first {
                (t1, t2) = (ts, tl);
            } else {
                (t2, t1) = (ts, tl);
            }
            let frame = StateVector9::from_parts(tl, EpaVector::zero(), ts, SlotRole::Transient);
            let b = optimal_behavior(model, listener_f, speaker_f, &frame, w)
                .unwrap()
                .behavior;
            let alpha = validate_epa(b.to_array()).unwrap().epa;
            out.push((if first { Role::Id1 } else { Role::Id2 }, alpha));
        }
    }
    out
}
