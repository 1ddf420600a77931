use std::cmp::Ordering;

use actgen_core::Scalar;

use crate::config::{DecodeConfig, DecodeMode};
use crate::model::Network;
use crate::tensor::Tensor;
use crate::vocab::{TokenSeq, Vocab, BOS, EOS, PAD};
use crate::NeuralError;

/// Tokens the decoder may never emit.
fn banned(id: usize) -> bool {
    id == PAD || id == BOS
}

/// Best allowed token; ties go to the lower id.
fn argmax<T: Scalar>(logp: &[T]) -> usize {
    let mut best = EOS;
    for (i, &v) in logp.iter().enumerate() {
        if !banned(i) && v > logp[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding. Emits at most `max_len` tokens; stops after EOS.
pub fn greedy<T: Scalar>(
    mut step: impl FnMut(&Tensor<T>, usize) -> (Tensor<T>, Vec<T>),
    h0: Tensor<T>,
    max_len: usize,
) -> Vec<usize> {
    let mut h = h0;
    let mut prev = BOS;
    let mut out = Vec::new();
    while out.len() < max_len {
        let (h1, logp) = step(&h, prev);
        let next = argmax(&logp);
        out.push(next);
        if next == EOS {
            break;
        }
        h = h1;
        prev = next;
    }
    out
}

struct Hyp<T> {
    tokens: Vec<usize>,
    score: T,
    state: Tensor<T>,
}

/// Beam search over summed log-probabilities (no length normalization).
/// Width 1 reproduces [`greedy`].
pub fn beam<T: Scalar>(
    mut step: impl FnMut(&Tensor<T>, usize) -> (Tensor<T>, Vec<T>),
    h0: Tensor<T>,
    max_len: usize,
    width: usize,
) -> Vec<usize> {
    let width = width.max(1);
    let mut alive = vec![Hyp {
        tokens: Vec::new(),
        score: T::zero(),
        state: h0,
    }];
    let mut finished: Vec<Hyp<T>> = Vec::new();

    for _ in 0..max_len {
        // (score, beam index, token)
        let mut cands: Vec<(T, usize, usize)> = Vec::new();
        let mut states = Vec::with_capacity(alive.len());
        for (b, hyp) in alive.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let (h1, logp) = step(&hyp.state, prev);
            for (tok, &lp) in logp.iter().enumerate() {
                if !banned(tok) {
                    cands.push((hyp.score + lp, b, tok));
                }
            }
            states.push(h1);
        }
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut next = Vec::with_capacity(width);
        for (score, b, tok) in cands.into_iter().take(width) {
            let mut tokens = alive[b].tokens.clone();
            tokens.push(tok);
            let hyp = Hyp {
                tokens,
                score,
                state: states[b].clone(),
            };
            if tok == EOS {
                finished.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        alive = next;
        let best_finished = finished
            .iter()
            .map(|h| h.score)
            .fold(None, |acc: Option<T>, s| Some(acc.map_or(s, |a| a.max(s))));
        let best_alive = alive.first().map(|h| h.score);
        match (best_finished, best_alive) {
            (_, None) => break,
            (Some(f), Some(a)) if f >= a => break,
            _ => {}
        }
    }
    finished
        .into_iter()
        .chain(alive)
        .fold(None::<Hyp<T>>, |best, h| match best {
            Some(b) if b.score >= h.score => Some(b),
            _ => Some(h),
        })
        .map(|h| h.tokens)
        .unwrap_or_default()
}

impl<T: Scalar> Network<T> {
    /// Decodes a response. Output is at most `decode.max_len` ids and ends
    /// with EOS unless the length limit was hit.
    pub fn generate(
        &self,
        prompt: &[usize],
        alpha: &[T; 3],
        decode: &DecodeConfig,
    ) -> Result<Vec<usize>, NeuralError> {
        decode.validate()?;
        let ctx = self.prepare_decode(prompt, alpha, decode.seed)?;
        let step = |h: &Tensor<T>, prev: usize| self.decode_step(&ctx, h, prev);
        let h0 = ctx.initial_state().clone();
        Ok(match decode.mode {
            DecodeMode::Greedy => greedy(step, h0, decode.max_len),
            DecodeMode::Beam => beam(step, h0, decode.max_len, decode.beam_width),
        })
    }
}

/// Text-level generation: encodes `prompt` with `vocab` and decodes the
/// reply into a [`TokenSeq`].
pub fn generate_response<T: Scalar>(
    network: &Network<T>,
    vocab: &Vocab,
    prompt: &str,
    alpha: &[T; 3],
    decode: &DecodeConfig,
) -> Result<TokenSeq, NeuralError> {
    if vocab.len() > network.config().vocab_size {
        return Err(NeuralError::Config(format!(
            "vocabulary of {} exceeds model vocab_size {}",
            vocab.len(),
            network.config().vocab_size
        )));
    }
    let c = vocab.encode(prompt, network.config().max_len);
    let ids = network.generate(&c.ids, alpha, decode)?;
    let surface = vocab.decode(&ids);
    Ok(TokenSeq { ids, surface })
}
