use actgen_core::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{ModelConfig, Variant, EPA_DIM};
use crate::gaussian::{kl_diag_gaussians_var, reparameterize_var, LOG_VAR_MAX, LOG_VAR_MIN};
use crate::graph::{Graph, Reduction, Var};
use crate::layers::{attention, BiGru, GruCell, Linear};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{log_softmax_rows, Tensor};
use crate::vocab::{BOS, EOS};
use crate::NeuralError;

/// One training triple in id form.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub prompt: Vec<usize>,
    pub alpha: [T; 3],
    pub response: Vec<usize>,
}

/// Loss values for one example. For seq2seq variants `kl` is zero and
/// `total == recon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub recon: T,
    pub kl: T,
}

#[derive(Debug, Clone, Copy)]
struct Mlp {
    hidden: Linear,
    out: Linear,
}

impl Mlp {
    /// Returns `(mean, clamped log_var)`, each `1 x latent`.
    fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: Var, latent: usize) -> (Var, Var) {
        let h = self.hidden.forward(g, x);
        let h = g.tanh(h);
        let o = self.out.forward(g, h);
        let mean = g.slice_cols(o, 0, latent);
        let lv = g.slice_cols(o, latent, latent);
        let lv = g.clamp(lv, T::lit(LOG_VAR_MIN), T::lit(LOG_VAR_MAX));
        (mean, lv)
    }
}

#[derive(Debug, Clone, Copy)]
struct Seq2SeqLayout {
    encoder: BiGru,
    memory: Linear,
    bridge: Linear,
    decoder: GruCell,
    output: Linear,
}

#[derive(Debug, Clone, Copy)]
struct CvaeLayout {
    context: BiGru,
    utterance: BiGru,
    prior: Mlp,
    posterior: Mlp,
    init: Linear,
    decoder: GruCell,
    output: Linear,
}

#[derive(Debug, Clone, Copy)]
enum Layout {
    Seq2Seq(Seq2SeqLayout),
    Cvae(CvaeLayout),
}

/// Parameters plus the wiring for one model variant.
#[derive(Debug, Clone)]
pub struct Network<T> {
    config: ModelConfig,
    store: ParamStore<T>,
    embedding: ParamId,
    layout: Layout,
}

/// Precomputed conditioning for step-by-step decoding.
#[derive(Debug, Clone)]
pub struct DecodeContext<T> {
    h0: Tensor<T>,
    /// Seq2seq: projected encoder states. CVAE: `[z; alpha]`.
    memory: Tensor<T>,
}

impl<T: Scalar> DecodeContext<T> {
    pub fn initial_state(&self) -> &Tensor<T> {
        &self.h0
    }
}

impl<T: Scalar> Network<T> {
    /// Randomly initialized from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let (e, h, v, l) = (
            config.embed_dim,
            config.hidden_dim,
            config.vocab_size,
            config.latent_dim,
        );
        let embedding = store.add("embedding", Tensor::uniform(v, e, 0.1, &mut rng));
        let layout = match config.variant {
            Variant::Seq2seqPlain | Variant::Seq2seqEpa => {
                let input = if config.variant == Variant::Seq2seqEpa {
                    e + EPA_DIM
                } else {
                    e
                };
                Layout::Seq2Seq(Seq2SeqLayout {
                    encoder: BiGru::new(&mut store, "encoder", input, h, &mut rng),
                    memory: Linear::new(&mut store, "memory", 2 * h, h, &mut rng),
                    bridge: Linear::new(&mut store, "bridge", 2 * h, h, &mut rng),
                    decoder: GruCell::new(&mut store, "decoder", e, h, &mut rng),
                    output: Linear::new(&mut store, "output", 2 * h, v, &mut rng),
                })
            }
            Variant::Cvae => Layout::Cvae(CvaeLayout {
                context: BiGru::new(&mut store, "context", e, h, &mut rng),
                utterance: BiGru::new(&mut store, "utterance", e, h, &mut rng),
                prior: Mlp {
                    hidden: Linear::new(&mut store, "prior.hidden", 2 * h + EPA_DIM, h, &mut rng),
                    out: Linear::new(&mut store, "prior.out", h, 2 * l, &mut rng),
                },
                posterior: Mlp {
                    hidden: Linear::new(
                        &mut store,
                        "posterior.hidden",
                        4 * h + EPA_DIM,
                        h,
                        &mut rng,
                    ),
                    out: Linear::new(&mut store, "posterior.out", h, 2 * l, &mut rng),
                },
                init: Linear::new(&mut store, "init", l + 2 * h + EPA_DIM, h, &mut rng),
                decoder: GruCell::new(&mut store, "decoder", e + l + EPA_DIM, h, &mut rng),
                output: Linear::new(&mut store, "output", h, v, &mut rng),
            }),
        };
        Ok(Self {
            config,
            store,
            embedding,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn check_ids(&self, what: &str, ids: &[usize]) -> Result<(), NeuralError> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(NeuralError::Input(format!(
                "{what} token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn check_alpha(alpha: &[T; 3]) -> Result<(), NeuralError> {
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(NeuralError::Input("alpha must be finite".into()));
        }
        Ok(())
    }

    pub fn validate_example(&self, ex: &Example<T>) -> Result<(), NeuralError> {
        self.check_ids("prompt", &ex.prompt)?;
        self.check_ids("response", &ex.response)?;
        Self::check_alpha(&ex.alpha)
    }

    /// Prompt ids truncated to `max_len`, followed by EOS.
    fn sequence(&self, ids: &[usize]) -> Vec<usize> {
        let mut seq: Vec<usize> = ids.iter().copied().take(self.config.max_len).collect();
        seq.push(EOS);
        seq
    }

    fn embed(&self, g: &mut Graph<T>, ids: &[usize], alpha: Option<&[T; 3]>) -> Var {
        let emb = g.embedding(self.embedding, ids);
        match alpha {
            None => emb,
            Some(a) => {
                let rep: Vec<T> = (0..ids.len()).flat_map(|_| a.iter().copied()).collect();
                let a = g.leaf(Tensor::from_vec(ids.len(), EPA_DIM, rep));
                g.concat_cols(&[emb, a])
            }
        }
    }

    /// Decoder inputs `[BOS, x..]` and targets `[x.., EOS]`.
    fn teacher_forcing(&self, response: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let x: Vec<usize> = response.iter().copied().take(self.config.max_len).collect();
        let mut input = vec![BOS];
        input.extend(&x);
        let mut target = x;
        target.push(EOS);
        (input, target)
    }

    fn seq2seq_graph(&self, g: &mut Graph<T>, l: &Seq2SeqLayout, ex: &Example<T>) -> Var {
        let alpha = (self.config.variant == Variant::Seq2seqEpa).then_some(&ex.alpha);
        let enc_in = self.embed(g, &self.sequence(&ex.prompt), alpha);
        let enc = l.encoder.encode(g, enc_in);
        let memory = l.memory.forward(g, enc.states);
        let h0 = l.bridge.forward(g, enc.summary);
        let mut h = g.tanh(h0);

        let (input, target) = self.teacher_forcing(&ex.response);
        let emb = g.embedding(self.embedding, &input);
        let mut feats = Vec::with_capacity(input.len());
        for t in 0..input.len() {
            let x = g.slice_rows(emb, t, 1);
            h = l.decoder.step(g, x, h);
            let (_, ctx) = attention(g, h, memory);
            feats.push(g.concat_cols(&[h, ctx]));
        }
        let feats = g.concat_rows(&feats);
        let logits = l.output.forward(g, feats);
        g.cross_entropy(logits, &target, Reduction::Mean)
    }

    /// Returns `(total, recon, kl)` nodes.
    fn cvae_graph(
        &self,
        g: &mut Graph<T>,
        l: &CvaeLayout,
        ex: &Example<T>,
        noise: &[T],
        anneal: T,
    ) -> (Var, Var, Var) {
        let latent = self.config.latent_dim;
        let c_in = self.embed(g, &self.sequence(&ex.prompt), None);
        let c = l.context.encode(g, c_in).summary;
        let alpha = g.leaf(Tensor::row_vector(ex.alpha.to_vec()));

        let prior_in = g.concat_cols(&[c, alpha]);
        let (mean_p, lv_p) = l.prior.forward(g, prior_in, latent);

        let x_in = self.embed(g, &self.sequence(&ex.response), None);
        let x = l.utterance.encode(g, x_in).summary;
        let post_in = g.concat_cols(&[c, x, alpha]);
        let (mean_q, lv_q) = l.posterior.forward(g, post_in, latent);

        let kl = kl_diag_gaussians_var(g, mean_q, lv_q, mean_p, lv_p);
        let eps = g.leaf(Tensor::row_vector(noise.to_vec()));
        let z = reparameterize_var(g, mean_q, lv_q, eps);

        let init_in = g.concat_cols(&[z, c, alpha]);
        let h0 = l.init.forward(g, init_in);
        let mut h = g.tanh(h0);
        let cond = g.concat_cols(&[z, alpha]);

        let (input, target) = self.teacher_forcing(&ex.response);
        let emb = g.embedding(self.embedding, &input);
        let mut states = Vec::with_capacity(input.len());
        for t in 0..input.len() {
            let e = g.slice_rows(emb, t, 1);
            let step_in = g.concat_cols(&[e, cond]);
            h = l.decoder.step(g, step_in, h);
            states.push(h);
        }
        let states = g.concat_rows(&states);
        let logits = l.output.forward(g, states);
        let recon = g.cross_entropy(logits, &target, Reduction::Sum);
        let weighted = g.scale(kl, anneal);
        let total = g.add(weighted, recon);
        (total, recon, kl)
    }

    fn check_cvae_args(&self, noise: &[T], anneal: T) -> Result<(), NeuralError> {
        if noise.len() != self.config.latent_dim {
            return Err(NeuralError::Shape {
                op: "cvae_loss",
                detail: format!(
                    "noise has {} values, latent_dim is {}",
                    noise.len(),
                    self.config.latent_dim
                ),
            });
        }
        if !(anneal >= T::zero() && anneal <= T::one()) {
            return Err(NeuralError::Input(format!(
                "anneal weight {anneal} outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// Builds the loss graph. `noise` and `anneal` are only used by the CVAE.
    fn loss_graph<'s>(
        &'s self,
        ex: &Example<T>,
        noise: &[T],
        anneal: T,
    ) -> Result<(Graph<'s, T>, Var, LossParts<T>), NeuralError> {
        self.validate_example(ex)?;
        let mut g = Graph::with_params(&self.store);
        match &self.layout {
            Layout::Seq2Seq(l) => {
                let loss = self.seq2seq_graph(&mut g, l, ex);
                let v = g.value(loss).item();
                let parts = LossParts {
                    total: v,
                    recon: v,
                    kl: T::zero(),
                };
                Ok((g, loss, parts))
            }
            Layout::Cvae(l) => {
                self.check_cvae_args(noise, anneal)?;
                let (total, recon, kl) = self.cvae_graph(&mut g, l, ex, noise, anneal);
                let parts = LossParts {
                    total: g.value(total).item(),
                    recon: g.value(recon).item(),
                    kl: g.value(kl).item(),
                };
                Ok((g, total, parts))
            }
        }
    }

    /// Loss values without gradients.
    pub fn loss(
        &self,
        ex: &Example<T>,
        noise: &[T],
        anneal: T,
    ) -> Result<LossParts<T>, NeuralError> {
        Ok(self.loss_graph(ex, noise, anneal)?.2)
    }

    /// Loss values and per-parameter gradients (aligned with the store).
    pub fn loss_and_grads(
        &self,
        ex: &Example<T>,
        noise: &[T],
        anneal: T,
    ) -> Result<(LossParts<T>, Vec<Option<Tensor<T>>>), NeuralError> {
        let (g, loss, parts) = self.loss_graph(ex, noise, anneal)?;
        Ok((parts, g.backward(loss).into_params()))
    }

    /// Encodes the prompt and fixes the latent for decoding. With a seed the
    /// CVAE samples `z` from the prior, otherwise it uses the prior mean.
    pub fn prepare_decode(
        &self,
        prompt: &[usize],
        alpha: &[T; 3],
        seed: Option<u64>,
    ) -> Result<DecodeContext<T>, NeuralError> {
        self.check_ids("prompt", prompt)?;
        Self::check_alpha(alpha)?;
        let mut g = Graph::with_params(&self.store);
        match &self.layout {
            Layout::Seq2Seq(l) => {
                let a = (self.config.variant == Variant::Seq2seqEpa).then_some(alpha);
                let enc_in = self.embed(&mut g, &self.sequence(prompt), a);
                let enc = l.encoder.encode(&mut g, enc_in);
                let memory = l.memory.forward(&mut g, enc.states);
                let h0 = l.bridge.forward(&mut g, enc.summary);
                let h0 = g.tanh(h0);
                Ok(DecodeContext {
                    h0: g.value(h0).clone(),
                    memory: g.value(memory).clone(),
                })
            }
            Layout::Cvae(l) => {
                let latent = self.config.latent_dim;
                let c_in = self.embed(&mut g, &self.sequence(prompt), None);
                let c = l.context.encode(&mut g, c_in).summary;
                let a = g.leaf(Tensor::row_vector(alpha.to_vec()));
                let prior_in = g.concat_cols(&[c, a]);
                let (mean, lv) = l.prior.forward(&mut g, prior_in, latent);
                let z = match seed {
                    None => mean,
                    Some(seed) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let noise: Vec<T> = (0..latent)
                            .map(|_| T::lit(StandardNormal.sample(&mut rng)))
                            .collect();
                        let eps = g.leaf(Tensor::row_vector(noise));
                        reparameterize_var(&mut g, mean, lv, eps)
                    }
                };
                let init_in = g.concat_cols(&[z, c, a]);
                let h0 = l.init.forward(&mut g, init_in);
                let h0 = g.tanh(h0);
                let cond = g.concat_cols(&[z, a]);
                Ok(DecodeContext {
                    h0: g.value(h0).clone(),
                    memory: g.value(cond).clone(),
                })
            }
        }
    }

    /// Advances the decoder by one token. Returns the new state and the
    /// log-probabilities of the next token.
    pub fn decode_step(
        &self,
        ctx: &DecodeContext<T>,
        h: &Tensor<T>,
        prev: usize,
    ) -> (Tensor<T>, Vec<T>) {
        let mut g = Graph::with_params(&self.store);
        let hv = g.leaf(h.clone());
        let mem = g.leaf(ctx.memory.clone());
        let emb = g.embedding(self.embedding, &[prev]);
        let (h1, logits) = match &self.layout {
            Layout::Seq2Seq(l) => {
                let h1 = l.decoder.step(&mut g, emb, hv);
                let (_, c) = attention(&mut g, h1, mem);
                let feats = g.concat_cols(&[h1, c]);
                (h1, l.output.forward(&mut g, feats))
            }
            Layout::Cvae(l) => {
                let step_in = g.concat_cols(&[emb, mem]);
                let h1 = l.decoder.step(&mut g, step_in, hv);
                (h1, l.output.forward(&mut g, h1))
            }
        };
        let logp = log_softmax_rows(g.value(logits)).into_vec();
        (g.value(h1).clone(), logp)
    }

    /// Overwrites parameter values by name, checking shapes.
    pub fn load_values(
        &mut self,
        values: impl IntoIterator<Item = (String, Tensor<T>)>,
    ) -> Result<(), NeuralError> {
        let mut seen = 0;
        for (name, t) in values {
            let id = self
                .store
                .id(&name)
                .ok_or_else(|| NeuralError::Checkpoint(format!("unknown parameter '{name}'")))?;
            let expected = self.store.value(id).shape();
            if t.shape() != expected {
                return Err(NeuralError::Checkpoint(format!(
                    "parameter '{name}' has shape {:?}, expected {expected:?}",
                    t.shape()
                )));
            }
            *self.store.value_mut(id) = t;
            seen += 1;
        }
        if seen != self.store.len() {
            return Err(NeuralError::Checkpoint(format!(
                "checkpoint has {seen} parameters, model has {}",
                self.store.len()
            )));
        }
        Ok(())
    }

    /// Matching (prior, posterior) parameter pairs of the latent heads. Empty
    /// for seq2seq variants.
    pub fn latent_heads(&self) -> Vec<(ParamId, ParamId)> {
        match &self.layout {
            Layout::Seq2Seq(_) => Vec::new(),
            Layout::Cvae(l) => vec![
                (l.prior.hidden.w, l.posterior.hidden.w),
                (l.prior.hidden.b, l.posterior.hidden.b),
                (l.prior.out.w, l.posterior.out.w),
                (l.prior.out.b, l.posterior.out.b),
            ],
        }
    }
}
