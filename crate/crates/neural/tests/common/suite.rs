//! Finite-difference checks shared by the gradient tests and the acceptance
//! report. Each returns `(name, worst relative error, tolerance)` rows.

use actgen_neural::gaussian::{kl_diag_gaussians_var, reparameterize_var};
use actgen_neural::layers::{attention, BiGru, GruCell};
use actgen_neural::{
    kl_diag_gaussians, Example, GaussianParams, ModelConfig, Network, ParamStore, Reduction,
    Variant,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

pub type Check = (String, f64, f64);

fn row(name: &str, err: f64, tol: f64) -> Check {
    (name.to_string(), err, tol)
}

pub fn matmul_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let inputs = [random(3, 4, &mut r), random(4, 2, &mut r)];
    let a = check_leaves(&inputs, seed, |g, v| g.matmul(v[0], v[1]));
    let inputs = [random(3, 4, &mut r), random(2, 4, &mut r)];
    let b = check_leaves(&inputs, seed, |g, v| g.matmul_t(v[0], v[1]));
    vec![row("matmul", a, 1e-6), row("matmul_t", b, 1e-6)]
}

pub fn elementwise_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let a = random(3, 4, &mut r);
    let b = random(3, 4, &mut r);
    let bias = random(1, 4, &mut r);
    let pair = [a.clone(), b];
    let bcast = [a.clone(), bias];
    let one = [a.clone()];
    // keep probes away from the clamp bounds
    let spread = a.map(|x| {
        if x.abs() < 0.55 && x.abs() > 0.45 {
            x + 0.2
        } else {
            x
        }
    });
    vec![
        row(
            "add",
            check_leaves(&pair, seed, |g, v| g.add(v[0], v[1])),
            TOL,
        ),
        row(
            "sub",
            check_leaves(&pair, seed, |g, v| g.sub(v[0], v[1])),
            TOL,
        ),
        row(
            "mul",
            check_leaves(&pair, seed, |g, v| g.mul(v[0], v[1])),
            TOL,
        ),
        row(
            "add_row",
            check_leaves(&bcast, seed, |g, v| g.add(v[0], v[1])),
            TOL,
        ),
        row(
            "sigmoid",
            check_leaves(&one, seed, |g, v| g.sigmoid(v[0])),
            TOL,
        ),
        row("tanh", check_leaves(&one, seed, |g, v| g.tanh(v[0])), TOL),
        row("exp", check_leaves(&one, seed, |g, v| g.exp(v[0])), TOL),
        row(
            "softmax",
            check_leaves(&one, seed, |g, v| g.softmax(v[0])),
            TOL,
        ),
        row(
            "scale",
            check_leaves(&one, seed, |g, v| g.scale(v[0], -1.7)),
            TOL,
        ),
        row(
            "add_scalar",
            check_leaves(&one, seed, |g, v| g.add_scalar(v[0], 0.3)),
            TOL,
        ),
        row("sum", check_leaves(&one, seed, |g, v| g.sum(v[0])), TOL),
        row(
            "clamp",
            check_leaves(&[spread], seed, |g, v| g.clamp(v[0], -0.5, 0.5)),
            TOL,
        ),
    ]
}

pub fn structural_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let cols = [
        random(2, 3, &mut r),
        random(2, 1, &mut r),
        random(2, 2, &mut r),
    ];
    let rows = [random(1, 3, &mut r), random(2, 3, &mut r)];
    let a = [random(4, 5, &mut r)];
    vec![
        row(
            "concat_cols",
            check_leaves(&cols, seed, |g, v| g.concat_cols(v)),
            TOL,
        ),
        row(
            "concat_rows",
            check_leaves(&rows, seed, |g, v| g.concat_rows(v)),
            TOL,
        ),
        row(
            "slice_cols",
            check_leaves(&a, seed, |g, v| g.slice_cols(v[0], 1, 3)),
            TOL,
        ),
        row(
            "slice_rows",
            check_leaves(&a, seed, |g, v| g.slice_rows(v[0], 2, 2)),
            TOL,
        ),
    ]
}

pub fn cross_entropy_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let logits = [random(3, 5, &mut r)];
    let targets = [
        r.random_range(0..5),
        r.random_range(0..5),
        r.random_range(0..5),
    ];
    [
        (Reduction::Mean, "cross_entropy_mean"),
        (Reduction::Sum, "cross_entropy_sum"),
    ]
    .into_iter()
    .map(|(red, name)| {
        let err = check_leaves(&logits, seed, |g, v| g.cross_entropy(v[0], &targets, red));
        row(name, err, TOL)
    })
    .collect()
}

pub fn embedding_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    store.add("emb", random(6, 3, &mut r));
    let w = random(4, 3, &mut r);
    let id = store.id("emb").unwrap();
    let err = check_params(&store, |g| {
        let e = g.embedding(id, &[2, 5, 2, 0]);
        let wv = g.leaf(w.clone());
        let p = g.mul(e, wv);
        g.sum(p)
    });
    vec![row("embedding", err, TOL)]
}

pub fn gru_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    let cell = GruCell::new(&mut store, "gru", 3, 4, &mut r);
    for id in [cell.bx, cell.bh] {
        *store.value_mut(id) = random(1, 12, &mut r);
    }
    let x = random(1, 3, &mut r);
    let h = random(1, 4, &mut r);
    let w = random(1, 4, &mut r);
    let params = check_params(&store, |g| {
        let xv = g.leaf(x.clone());
        let hv = g.leaf(h.clone());
        let h1 = cell.step(g, xv, hv);
        let wv = g.leaf(w.clone());
        let p = g.mul(h1, wv);
        g.sum(p)
    });
    let inputs = check_leaves_in(Some(&store), &[x.clone(), h.clone()], seed, |g, v| {
        cell.step(g, v[0], v[1])
    });
    vec![
        row("gru_step params", params, TOL),
        row("gru_step inputs", inputs, TOL),
    ]
}

pub fn encoder_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    let enc = BiGru::new(&mut store, "enc", 2, 3, &mut r);
    let seq = random(3, 2, &mut r);
    let w = random(1, 6, &mut r);
    let err = check_params(&store, |g| {
        let x = g.leaf(seq.clone());
        let out = enc.encode(g, x);
        let wv = g.leaf(w.clone());
        let p = g.mul(out.summary, wv);
        g.sum(p)
    });
    vec![row("bigru", err, TOL)]
}

pub fn attention_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let inputs = [random(1, 4, &mut r), random(5, 4, &mut r)];
    vec![
        row(
            "attention context",
            check_leaves(&inputs, seed, |g, v| attention(g, v[0], v[1]).1),
            TOL,
        ),
        row(
            "attention weights",
            check_leaves(&inputs, seed, |g, v| attention(g, v[0], v[1]).0),
            TOL,
        ),
    ]
}

pub fn gaussian_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let inputs: Vec<_> = (0..4).map(|_| random(1, 6, &mut r)).collect();
    let kl = check_leaves(&inputs, seed, |g, v| {
        kl_diag_gaussians_var(g, v[0], v[1], v[2], v[3])
    });
    let inputs = [
        random(1, 5, &mut r),
        random(1, 5, &mut r),
        random(1, 5, &mut r),
    ];
    let rep = check_leaves(&inputs, seed, |g, v| {
        let z = reparameterize_var(g, v[0], v[1], v[2]);
        let sq = g.mul(z, z);
        g.sum(sq)
    });
    vec![row("kl", kl, TOL), row("reparameterize", rep, TOL)]
}

pub fn toy_config(variant: Variant, seed: u64) -> ModelConfig {
    ModelConfig {
        embed_dim: 3,
        hidden_dim: 3,
        vocab_size: 7,
        max_len: 4,
        latent_dim: 2,
        epa_dim: 3,
        variant,
        seed,
    }
}

pub fn toy_example() -> Example<f64> {
    Example {
        prompt: vec![4, 5],
        alpha: [1.2, -0.4, 0.7],
        response: vec![6, 4],
    }
}

pub fn model_loss_checks(seed: u64) -> Vec<Check> {
    let ex = toy_example();
    let mut out = Vec::new();
    for variant in [Variant::Seq2seqPlain, Variant::Seq2seqEpa] {
        let net = Network::<f64>::new(toy_config(variant, seed)).unwrap();
        let err = check_network(&net, |n| {
            let (parts, grads) = n.loss_and_grads(&ex, &[], 0.0).unwrap();
            (parts.total, grads)
        });
        out.push(row(&format!("{variant}_loss"), err, TOL));
    }
    let net = Network::<f64>::new(toy_config(Variant::Cvae, seed)).unwrap();
    let noise = [0.3, -1.1];
    let err = check_network(&net, |n| {
        let (parts, grads) = n.loss_and_grads(&ex, &noise, 0.6).unwrap();
        (parts.total, grads)
    });
    out.push(row("cvae_loss", err, TOL));
    out
}

/// Every check above for one seed.
pub fn all_checks(seed: u64) -> Vec<Check> {
    [
        matmul_checks,
        elementwise_checks,
        structural_checks,
        cross_entropy_checks,
        embedding_checks,
        gru_checks,
        encoder_checks,
        attention_checks,
        gaussian_checks,
        model_loss_checks,
    ]
    .iter()
    .flat_map(|f| f(seed))
    .collect()
}

/// Random 8-D diagonal Gaussians and the Monte-Carlo KL estimate.
/// Returns `(monte carlo, closed form)`.
pub fn kl_monte_carlo(seed: u64, samples: usize) -> (f64, f64) {
    let mut r = rng(seed);
    let d = 8;
    let mut draw = |lo: f64, hi: f64| (0..d).map(|_| r.random_range(lo..hi)).collect::<Vec<f64>>();
    let q = GaussianParams::new(draw(-1.0, 1.0), draw(-1.0, 0.5));
    let p = GaussianParams::new(draw(-1.0, 1.0), draw(-0.5, 1.0));
    let log_density = |g: &GaussianParams<f64>, z: &[f64]| -> f64 {
        (0..d)
            .map(|i| {
                let var = g.log_var[i].exp();
                -0.5 * ((2.0 * std::f64::consts::PI).ln() + g.log_var[i])
                    - (z[i] - g.mean[i]).powi(2) / (2.0 * var)
            })
            .sum()
    };
    let mut total = 0.0;
    for _ in 0..samples {
        let noise: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let z = q.reparameterize(&noise);
        total += log_density(&q, &z) - log_density(&p, &z);
    }
    (total / samples as f64, kl_diag_gaussians(&q, &p))
}
