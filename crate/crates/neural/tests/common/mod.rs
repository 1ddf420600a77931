#![allow(dead_code)]

use actgen_neural::{Graph, Network, ParamStore, Tensor, Var};

pub mod suite;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
}

/// Norm-wise relative error between two gradient arrays.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-8)
}

/// Central differences of `f` around `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + H;
            let up = f(&probe);
            probe[i] = orig - H;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// Checks the gradient of `sum(weights * build(inputs))` with respect to each
/// input. Returns the worst relative error.
pub fn check_leaves(
    inputs: &[Tensor<f64>],
    seed: u64,
    build: impl Fn(&mut Graph<f64>, &[Var]) -> Var,
) -> f64 {
    check_leaves_in(None, inputs, seed, build)
}

/// [`check_leaves`] on a graph that can also read frozen parameters.
pub fn check_leaves_in(
    store: Option<&ParamStore<f64>>,
    inputs: &[Tensor<f64>],
    seed: u64,
    build: impl Fn(&mut Graph<f64>, &[Var]) -> Var,
) -> f64 {
    let fresh = || match store {
        Some(s) => Graph::with_params(s),
        None => Graph::new(),
    };
    let mut r = rng(seed ^ 0xabcdef);
    let shape = {
        let mut g = fresh();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.shape(out)
    };
    let eval = |xs: &[Tensor<f64>], w: &Tensor<f64>| {
        let mut g = fresh();
        let vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = build(&mut g, &vars);
        let wv = g.leaf(w.clone());
        let prod = g.mul(out, wv);
        let loss = g.sum(prod);
        (g, vars, loss)
    };
    let weights = random(shape.0, shape.1, &mut r);
    let (g, vars, loss) = eval(inputs, &weights);
    let grads = g.backward(loss);
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads
            .wrt(vars[k])
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; input.len()]);
        let numeric = numeric_grad(input.data(), |probe| {
            let mut xs = inputs.to_vec();
            xs[k] = Tensor::from_vec(input.rows(), input.cols(), probe.to_vec());
            let (g, _, loss) = eval(&xs, &weights);
            g.value(loss).item()
        });
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Checks the gradient of a scalar `build` with respect to every parameter in
/// `store`. Returns the worst relative error.
pub fn check_params(store: &ParamStore<f64>, build: impl Fn(&mut Graph<'_, f64>) -> Var) -> f64 {
    let mut g = Graph::with_params(store);
    let loss = build(&mut g);
    let grads = g.backward(loss);
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        let value = store.value(id);
        let analytic = grads
            .param(id)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; value.len()]);
        let numeric = numeric_grad(value.data(), |probe| {
            let mut s = store.clone();
            *s.value_mut(id) = Tensor::from_vec(value.rows(), value.cols(), probe.to_vec());
            let mut g = Graph::with_params(&s);
            let l = build(&mut g);
            g.value(l).item()
        });
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Same as [`check_params`] for a whole network loss.
pub fn check_network(
    net: &Network<f64>,
    loss: impl Fn(&Network<f64>) -> (f64, Vec<Option<Tensor<f64>>>),
) -> f64 {
    let (_, grads) = loss(net);
    let mut worst: f64 = 0.0;
    for id in net.params().ids() {
        let value = net.params().value(id);
        let analytic = grads[id.index()]
            .as_ref()
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; value.len()]);
        let numeric = numeric_grad(value.data(), |probe| {
            let mut n = net.clone();
            *n.params_mut().value_mut(id) =
                Tensor::from_vec(value.rows(), value.cols(), probe.to_vec());
            loss(&n).0
        });
        let err = rel_err(&analytic, &numeric);
        worst = worst.max(err);
    }
    worst
}
