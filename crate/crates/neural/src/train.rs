use std::io::Write;
use std::path::{Path, PathBuf};

use actgen_core::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::config::{AnnealSchedule, ModelConfig, Variant};
use crate::model::{Example, Network};
use crate::tensor::Tensor;
use crate::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient norm limit; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub batch_size: usize,
    pub steps: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
            batch_size: 8,
            steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub optimizer: OptimizerSettings,
    /// KL weight ramp. `None` trains the CVAE with full KL weight from step 1.
    pub anneal: Option<AnnealSchedule>,
    /// Writes a checkpoint here when training ends.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            anneal: Some(AnnealSchedule::default()),
            checkpoint: None,
        }
    }
}

/// One row per optimizer step; losses are batch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub anneal_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), NeuralError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), NeuralError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Mean of `f` over the last `n` rows.
    pub fn tail_mean(&self, n: usize, f: impl Fn(&LogRow) -> f64) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().map(f).sum::<f64>() / tail.len() as f64
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    settings: OptimizerSettings,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(network: &Network<T>, settings: OptimizerSettings) -> Self {
        let zeros: Vec<Tensor<T>> = network
            .params()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            settings,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// Clips, then applies the accumulated gradients and clears them.
    pub fn step(&mut self, network: &mut Network<T>) {
        let s = &self.settings;
        let store = network.params_mut();
        if let Some(limit) = s.clip_norm {
            let norm = store.grad_norm();
            let limit = T::lit(limit);
            if norm > limit {
                store.scale_grads(limit / norm);
            }
        }
        self.t += 1;
        let (lr, b1, b2, eps) = (
            T::lit(s.lr),
            T::lit(s.beta1),
            T::lit(s.beta2),
            T::lit(s.eps),
        );
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let (values, grads) = store.values_and_grads();
        for (((p, g), m), v) in values
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let p = p.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        store.zero_grad();
    }
}

/// Trains a fresh network initialized from `config.seed`.
pub fn train_model<T: Scalar>(
    dataset: &[Example<T>],
    config: &ModelConfig,
    settings: &TrainSettings,
) -> Result<(Network<T>, TrainingLog), NeuralError> {
    let mut network = Network::new(config.clone())?;
    let log = train_network(&mut network, dataset, settings)?;
    Ok((network, log))
}

/// Continues training `network` in place. Batches are drawn by reshuffling
/// the dataset every epoch; all randomness derives from the config seed.
pub fn train_network<T: Scalar>(
    network: &mut Network<T>,
    dataset: &[Example<T>],
    settings: &TrainSettings,
) -> Result<TrainingLog, NeuralError> {
    if dataset.is_empty() {
        return Err(NeuralError::Input("training set is empty".into()));
    }
    let opt = &settings.optimizer;
    if opt.batch_size == 0 {
        return Err(NeuralError::Config("batch_size must be at least 1".into()));
    }
    if !(opt.lr >= 0.0) {
        return Err(NeuralError::Config(
            "learning rate must be non-negative".into(),
        ));
    }
    for ex in dataset {
        network.validate_example(ex)?;
    }
    let cvae = network.variant() == Variant::Cvae;
    let latent = network.config().latent_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(network.config().seed ^ 0x5eed_da7a);
    let mut adam = Adam::new(network, opt.clone());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let mut log = TrainingLog::default();
    network.params_mut().zero_grad();

    for step in 1..=opt.steps {
        let anneal = match (cvae, settings.anneal) {
            (false, _) => 0.0,
            (true, Some(s)) => s.weight(step),
            (true, None) => 1.0,
        };
        let inv = T::one() / T::lit(opt.batch_size as f64);
        let (mut total, mut recon, mut kl) = (0.0, 0.0, 0.0);
        for _ in 0..opt.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ex = &dataset[order[cursor]];
            cursor += 1;
            let noise: Vec<T> = if cvae {
                (0..latent)
                    .map(|_| T::lit(StandardNormal.sample(&mut rng)))
                    .collect()
            } else {
                Vec::new()
            };
            let (parts, grads) = network.loss_and_grads(ex, &noise, T::lit(anneal))?;
            if !parts.total.is_finite() {
                return Err(NeuralError::NonFinite { step });
            }
            total += parts.total.as_f64();
            recon += parts.recon.as_f64();
            kl += parts.kl.as_f64();
            network.params_mut().accumulate(grads, inv);
        }
        if !network.params().grad_norm().is_finite() {
            return Err(NeuralError::NonFinite { step });
        }
        adam.step(network);
        let n = opt.batch_size as f64;
        log.rows.push(LogRow {
            step,
            total: total / n,
            recon: recon / n,
            kl: kl / n,
            anneal_weight: anneal,
        });
    }
    if let Some(path) = &settings.checkpoint {
        save_checkpoint(network, opt.steps, path)?;
    }
    Ok(log)
}
