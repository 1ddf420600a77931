use actgen_core::Scalar;
use rand::Rng;

use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w: store.add(format!("{name}.w"), Tensor::glorot(input, output, rng)),
            b: store.add(format!("{name}.b"), Tensor::zeros(1, output)),
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let xw = g.matmul(x, w);
        g.add(xw, b)
    }
}

/// Gated recurrent unit with separate input and hidden biases.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bx: ParamId,
    pub bh: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            wx: store.add(format!("{name}.wx"), Tensor::glorot(input, 3 * hidden, rng)),
            wh: store.add(
                format!("{name}.wh"),
                Tensor::glorot(hidden, 3 * hidden, rng),
            ),
            bx: store.add(format!("{name}.bx"), Tensor::zeros(1, 3 * hidden)),
            bh: store.add(format!("{name}.bh"), Tensor::zeros(1, 3 * hidden)),
            hidden,
        }
    }

    /// One step: `r, z = sigmoid(..)`, `n = tanh(x Wn + bn + r * (h Un + un))`,
    /// `h' = (1 - z) * n + z * h`.
    pub fn step<T: Scalar>(&self, g: &mut Graph<T>, x: Var, h: Var) -> Var {
        let hs = self.hidden;
        let (wx, wh, bx, bh) = (
            g.param(self.wx),
            g.param(self.wh),
            g.param(self.bx),
            g.param(self.bh),
        );
        let gx = g.matmul(x, wx);
        let gx = g.add(gx, bx);
        let gh = g.matmul(h, wh);
        let gh = g.add(gh, bh);

        let xr = g.slice_cols(gx, 0, hs);
        let hr = g.slice_cols(gh, 0, hs);
        let r = g.add(xr, hr);
        let r = g.sigmoid(r);

        let xz = g.slice_cols(gx, hs, hs);
        let hz = g.slice_cols(gh, hs, hs);
        let z = g.add(xz, hz);
        let z = g.sigmoid(z);

        let xn = g.slice_cols(gx, 2 * hs, hs);
        let hn = g.slice_cols(gh, 2 * hs, hs);
        let rhn = g.mul(r, hn);
        let n = g.add(xn, rhn);
        let n = g.tanh(n);

        let diff = g.sub(h, n);
        let zd = g.mul(z, diff);
        g.add(n, zd)
    }
}

/// States produced by running a [`BiGru`] over a sequence.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// `n x 2H`, forward and backward state per position.
    pub states: Var,
    /// `1 x 2H`, last forward state and first backward state.
    pub summary: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct BiGru {
    pub forward: GruCell,
    pub backward: GruCell,
}

impl BiGru {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            forward: GruCell::new(store, &format!("{name}.fwd"), input, hidden, rng),
            backward: GruCell::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    /// Encodes `inputs` (`n x d`, `n >= 1`).
    pub fn encode<T: Scalar>(&self, g: &mut Graph<T>, inputs: Var) -> EncoderOutput {
        let n = g.shape(inputs).0;
        assert!(n > 0, "cannot encode an empty sequence");
        let xs: Vec<Var> = (0..n).map(|i| g.slice_rows(inputs, i, 1)).collect();
        let h0 = g.leaf(Tensor::zeros(1, self.hidden()));

        let mut fwd = Vec::with_capacity(n);
        let mut h = h0;
        for &x in &xs {
            h = self.forward.step(g, x, h);
            fwd.push(h);
        }
        let mut bwd = vec![h0; n];
        let mut h = h0;
        for i in (0..n).rev() {
            h = self.backward.step(g, xs[i], h);
            bwd[i] = h;
        }
        let rows: Vec<Var> = (0..n).map(|i| g.concat_cols(&[fwd[i], bwd[i]])).collect();
        let states = g.concat_rows(&rows);
        let summary = g.concat_cols(&[fwd[n - 1], bwd[0]]);
        EncoderOutput { states, summary }
    }
}

/// Dot-product attention of a `1 x H` query over `n x H` memory. Returns the
/// weights (`1 x n`) and the context (`1 x H`).
pub fn attention<T: Scalar>(g: &mut Graph<T>, query: Var, memory: Var) -> (Var, Var) {
    let scores = g.matmul_t(query, memory);
    let weights = g.softmax(scores);
    let ctx = g.matmul(weights, memory);
    (weights, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gru_with_zero_weights_halves_state() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = GruCell::new(&mut store, "g", 2, 3, &mut rng);
        for id in [cell.wx, cell.wh] {
            store
                .value_mut(id)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = 0.0);
        }
        let mut g = Graph::with_params(&store);
        let x = g.leaf(Tensor::row_vector(vec![1.0, -1.0]));
        let h = g.leaf(Tensor::row_vector(vec![0.4, -0.8, 2.0]));
        let h1 = cell.step(&mut g, x, h);
        assert_eq!(g.value(h1).data(), &[0.2, -0.4, 1.0]);
    }

    #[test]
    fn attention_weights_form_a_distribution() {
        let mut g = Graph::<f64>::new();
        let q = g.leaf(Tensor::row_vector(vec![1.0, 0.0]));
        let m = g.leaf(Tensor::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0]));
        let (w, ctx) = attention(&mut g, q, m);
        let w = g.value(w);
        assert!((w.sum() - 1.0).abs() < 1e-12);
        assert!(w.get(0, 0) > w.get(0, 1) && w.get(0, 1) > w.get(0, 2));
        assert_eq!(g.shape(ctx), (1, 2));
    }
}
