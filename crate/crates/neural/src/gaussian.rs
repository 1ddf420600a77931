use actgen_core::Scalar;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Var};

/// Bounds applied to predicted log-variances.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

/// Diagonal Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams<T> {
    pub mean: Vec<T>,
    pub log_var: Vec<T>,
}

impl<T: Scalar> GaussianParams<T> {
    /// Builds the distribution, clamping log-variances into
    /// `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    pub fn new(mean: Vec<T>, log_var: Vec<T>) -> Self {
        assert_eq!(mean.len(), log_var.len(), "mean/log_var length mismatch");
        let (lo, hi) = (T::lit(LOG_VAR_MIN), T::lit(LOG_VAR_MAX));
        let log_var = log_var.into_iter().map(|v| v.max(lo).min(hi)).collect();
        Self { mean, log_var }
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            log_var: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean + exp(log_var / 2) * noise`.
    pub fn reparameterize(&self, noise: &[T]) -> Vec<T> {
        assert_eq!(noise.len(), self.dim(), "noise length");
        let half = T::lit(0.5);
        self.mean
            .iter()
            .zip(&self.log_var)
            .zip(noise)
            .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
            .collect()
    }
}

/// `KL(q || p)` between diagonal Gaussians, in closed form.
pub fn kl_diag_gaussians<T: Scalar>(q: &GaussianParams<T>, p: &GaussianParams<T>) -> T {
    assert_eq!(q.dim(), p.dim(), "dimension mismatch");
    let half = T::lit(0.5);
    (0..q.dim())
        .map(|i| {
            let (mq, lq, mp, lp) = (q.mean[i], q.log_var[i], p.mean[i], p.log_var[i]);
            let d = mp - mq;
            half * ((lq - lp).exp() + d * d * (-lp).exp() - T::one() + lp - lq)
        })
        .sum()
}

/// Graph version of [`kl_diag_gaussians`]; all inputs are `1 x d`.
pub fn kl_diag_gaussians_var<T: Scalar>(
    g: &mut Graph<T>,
    mean_q: Var,
    log_var_q: Var,
    mean_p: Var,
    log_var_p: Var,
) -> Var {
    let d = g.sub(log_var_q, log_var_p);
    let ratio = g.exp(d);
    let diff = g.sub(mean_p, mean_q);
    let sq = g.mul(diff, diff);
    let neg_lp = g.scale(log_var_p, -T::one());
    let inv_var_p = g.exp(neg_lp);
    let maha = g.mul(sq, inv_var_p);
    let t = g.add(ratio, maha);
    let neg_d = g.scale(d, -T::one());
    let t = g.add(t, neg_d);
    let t = g.add_scalar(t, -T::one());
    let s = g.sum(t);
    g.scale(s, T::lit(0.5))
}

/// Graph version of [`GaussianParams::reparameterize`].
pub fn reparameterize_var<T: Scalar>(g: &mut Graph<T>, mean: Var, log_var: Var, noise: Var) -> Var {
    let half = g.scale(log_var, T::lit(0.5));
    let std = g.exp(half);
    let scaled = g.mul(std, noise);
    g.add(mean, scaled)
}
