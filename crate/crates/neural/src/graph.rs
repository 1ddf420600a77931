//! Reverse-mode automatic differentiation over [`Tensor`]s.

use actgen_core::Scalar;

use crate::params::{ParamId, ParamStore};
use crate::tensor::{log_softmax_rows, softmax_rows, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Softmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Embedding(ParamId, Vec<usize>),
    CrossEntropy(Var, Vec<usize>, Reduction, Tensor<T>),
    Sum(Var),
    Clamp(Var, T, T),
}

struct Node<T> {
    value: Option<Tensor<T>>,
    op: Op<T>,
}

/// Records operations for a single forward pass. Parameters are read from a
/// borrowed [`ParamStore`].
pub struct Graph<'s, T: Scalar> {
    store: Option<&'s ParamStore<T>>,
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    nodes: Vec<Option<Tensor<T>>>,
    params: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].as_ref()
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(id.index()).and_then(Option::as_ref)
    }

    pub fn into_params(self) -> Vec<Option<Tensor<T>>> {
        self.params
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl<'s, T: Scalar> Default for Graph<'s, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'s, T: Scalar> Graph<'s, T> {
    /// A graph with no parameters; only leaves.
    pub fn new() -> Self {
        Self {
            store: None,
            nodes: Vec::new(),
        }
    }

    pub fn with_params(store: &'s ParamStore<T>) -> Self {
        Self {
            store: Some(store),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn store(&self) -> &'s ParamStore<T> {
        self.store.expect("graph has no parameter store")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store().value(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(sa.1 == sb.0, "shape error in matmul: {sa:?} x {sb:?}");
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(sa.1 == sb.1, "shape error in matmul_t: {sa:?} x {sb:?}^T");
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    /// Elementwise sum. A `1 x n` right operand is broadcast over rows.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
            return self.push(v, Op::Add(a, b));
        }
        assert!(
            sb.0 == 1 && sb.1 == sa.1,
            "shape error in add: {sa:?} and {sb:?}"
        );
        let mut v = self.value(a).clone();
        let row = self.value(b).data().to_vec();
        for r in 0..sa.0 {
            for (x, &y) in v.row_mut(r).iter_mut().zip(&row) {
                *x = *x + y;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(sa == sb, "shape error in sub: {sa:?} and {sb:?}");
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(sa == sb, "shape error in mul: {sa:?} and {sb:?}");
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        let v = self.value(a).map(|x| x + s);
        self.push(v, Op::AddScalar(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| T::one() / (T::one() + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(T::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(T::exp);
        self.push(v, Op::Exp(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.rows(), rows, "concat_cols: row mismatch");
            for r in 0..rows {
                out.row_mut(r)[offset..offset + t.cols()].copy_from_slice(t.row(r));
            }
            offset += t.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows: no inputs");
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), cols, "concat_rows: column mismatch");
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        self.push(
            Tensor::from_vec(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        assert!(start + len <= t.cols(), "slice_cols out of range");
        let mut out = Tensor::zeros(t.rows(), len);
        for r in 0..t.rows() {
            out.row_mut(r)
                .copy_from_slice(&t.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        assert!(start + len <= t.rows(), "slice_rows out of range");
        let cols = t.cols();
        let out = Tensor::from_vec(
            len,
            cols,
            t.data()[start * cols..(start + len) * cols].to_vec(),
        );
        self.push(out, Op::SliceRows(a, start))
    }

    /// Looks up rows of an embedding table.
    pub fn embedding(&mut self, table: ParamId, ids: &[usize]) -> Var {
        let t = self.store().value(table);
        let mut data = Vec::with_capacity(ids.len() * t.cols());
        for &id in ids {
            data.extend_from_slice(t.row(id));
        }
        let out = Tensor::from_vec(ids.len(), t.cols(), data);
        self.push(out, Op::Embedding(table, ids.to_vec()))
    }

    /// Softmax cross-entropy of `logits` (one row per target).
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], reduction: Reduction) -> Var {
        let l = self.value(logits);
        assert_eq!(l.rows(), targets.len(), "cross_entropy: target count");
        let logp = log_softmax_rows(l);
        let mut total = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            total = total - logp.get(r, t);
        }
        if reduction == Reduction::Mean {
            total = total / T::lit(targets.len() as f64);
        }
        let probs = logp.map(T::exp);
        self.push(
            Tensor::scalar(total),
            Op::CrossEntropy(logits, targets.to_vec(), reduction, probs),
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Clamps into `[lo, hi]`; gradient is zero where the bound is active.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        let v = self.value(a).map(|x| x.max(lo).min(hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    /// Backpropagates from a `1 x 1` node.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar loss");
        let param_count = self.store.map_or(0, ParamStore::len);
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut params: Vec<Option<Tensor<T>>> = (0..param_count).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => accumulate(&mut params[id.index()], g.clone()),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.clone());
                }
                Op::AddRow(a, b) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (s, &x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *s = *s + x;
                        }
                    }
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads[a.0], g.map(|x| x * s));
                }
                Op::AddScalar(a) => accumulate(&mut grads[a.0], g.clone()),
                Op::Sigmoid(a) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    let ga = g.zip_map(y, |x, y| x * y * (T::one() - y));
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Tanh(a) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    let ga = g.zip_map(y, |x, y| x * (T::one() - y * y));
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Exp(a) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    accumulate(&mut grads[a.0], g.zip_map(y, |x, y| x * y));
                }
                Op::Softmax(a) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    let mut ga = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: T = g.row(r).iter().zip(y.row(r)).map(|(&a, &b)| a * b).sum();
                        for c in 0..y.cols() {
                            ga.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let cols = self.shape(*p).1;
                        let mut gp = Tensor::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.row_mut(r)
                                .copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let rows = self.shape(*p).0;
                        let gp = Tensor::from_vec(
                            rows,
                            cols,
                            g.data()[offset * cols..(offset + rows) * cols].to_vec(),
                        );
                        offset += rows;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut ga = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::SliceRows(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut ga = Tensor::zeros(rows, cols);
                    ga.data_mut()[start * cols..(start + g.rows()) * cols]
                        .copy_from_slice(g.data());
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Embedding(table, ids) => {
                    let (rows, cols) = self.store().value(*table).shape();
                    let slot = &mut params[table.index()];
                    let acc = slot.get_or_insert_with(|| Tensor::zeros(rows, cols));
                    for (r, &id) in ids.iter().enumerate() {
                        for (a, &x) in acc.row_mut(id).iter_mut().zip(g.row(r)) {
                            *a = *a + x;
                        }
                    }
                }
                Op::CrossEntropy(logits, targets, reduction, probs) => {
                    let scale = match reduction {
                        Reduction::Mean => g.item() / T::lit(targets.len() as f64),
                        Reduction::Sum => g.item(),
                    };
                    let mut ga = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        ga.set(r, t, ga.get(r, t) - T::one());
                    }
                    ga.scale_assign(scale);
                    accumulate(&mut grads[logits.0], ga);
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.shape(*a);
                    let ga = Tensor::from_vec(rows, cols, vec![g.item(); rows * cols]);
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let ga =
                        g.zip_map(
                            self.value(*a),
                            |x, v| {
                                if v > lo && v < hi {
                                    x
                                } else {
                                    T::zero()
                                }
                            },
                        );
                    accumulate(&mut grads[a.0], ga);
                }
            }
            grads[i] = Some(g);
        }
        Gradients {
            nodes: grads,
            params,
        }
    }
}
