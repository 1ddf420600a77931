use actgen_core::{
    validate_epa, ActError, DeflectionWeights, Epa, EventABO, Identity, ImpressionModel,
    InteractionState, Party, Scalar, SentenceToEpa,
};
use actgen_neural::{Example, Vocab};
use serde::{Deserialize, Serialize};

use crate::ingest::Conversation;

/// Which configured identity uttered the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Id1,
    Id2,
}

impl Role {
    pub fn party(self) -> Party {
        match self {
            Role::Id1 => Party::A,
            Role::Id2 => Party::B,
        }
    }

    /// Speaker of utterance `index` within a conversation.
    pub fn for_index(index: usize) -> Self {
        if index.is_multiple_of(2) {
            Role::Id1
        } else {
            Role::Id2
        }
    }
}

/// One (prompt, target affect, response) training unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingTriple {
    #[serde(rename = "c")]
    pub prompt: String,
    pub alpha: Epa,
    #[serde(rename = "x")]
    pub response: String,
    pub speaker: Role,
}

impl TrainingTriple {
    /// Token ids under `vocab`, truncated to `max_len`.
    pub fn to_example<T: Scalar>(&self, vocab: &Vocab, max_len: usize) -> Example<T> {
        let a = self.alpha.to_f64();
        Example {
            prompt: vocab.encode(&self.prompt, max_len).ids,
            alpha: [T::lit(a[0]), T::lit(a[1]), T::lit(a[2])],
            response: vocab.encode(&self.response, max_len).ids,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TripleReport {
    pub conversations: usize,
    pub pairs: usize,
    pub triples: usize,
    pub skipped_s2epa: usize,
    pub skipped_solver: usize,
}

impl TripleReport {
    pub fn skipped(&self) -> usize {
        self.skipped_s2epa + self.skipped_solver
    }
}

/// Replays each conversation as alternating events between `id1` and `id2`.
///
/// For every adjacent pair (C, X) the speaker of C acts on the listener with
/// the sentence EPA of C, and the listener's deflection-minimizing response
/// becomes α. Transients carry over inside a conversation. Conversations are
/// processed in source-id order so the output is deterministic.
pub fn construct_triples(
    conversations: &[Conversation],
    id1: &Identity<f64>,
    id2: &Identity<f64>,
    s2epa: &SentenceToEpa<f64>,
    model: &ImpressionModel<f64>,
    w: &DeflectionWeights<f64>,
) -> (Vec<TrainingTriple>, TripleReport) {
    let mut order: Vec<&Conversation> = conversations.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mut report = TripleReport {
        conversations: order.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for conv in order {
        let mut state = InteractionState::new(id1.clone(), id2.clone());
        for (i, pair) in conv.utterances.windows(2).enumerate() {
            report.pairs += 1;
            let speaker = Role::for_index(i);
            let u = match s2epa.epa(&pair[0]) {
                Ok(u) => u,
                Err(_) => {
                    report.skipped_s2epa += 1;
                    continue;
                }
            };
            let event = match EventABO::between(&state, speaker.party(), u) {
                Ok(e) => e,
                Err(_) => {
                    report.skipped_solver += 1;
                    continue;
                }
            };
            state = match state.apply_event(event, model, w) {
                Ok(s) => s,
                Err(_) => {
                    report.skipped_solver += 1;
                    continue;
                }
            };
            let alpha = state
                .optimal_for(speaker.party().other(), model, w)
                .and_then(|opt| Ok::<_, ActError>(validate_epa(opt.behavior.to_array())?.epa));
            match alpha {
                Ok(alpha) => {
                    out.push(TrainingTriple {
                        prompt: pair[0].clone(),
                        alpha,
                        response: pair[1].clone(),
                        speaker,
                    });
                    report.triples += 1;
                }
                Err(_) => report.skipped_solver += 1,
            }
        }
    }
    (out, report)
}
