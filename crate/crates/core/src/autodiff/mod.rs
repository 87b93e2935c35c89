//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every primitive applied to its variables in
//! execution order, which is already a topological order. Calling
//! [`Graph::backward`] on a scalar node walks the record once in reverse
//! and returns a [`GradientMap`] with one entry per parameter leaf.

mod gradcheck;

pub use gradcheck::{grad_check, grad_check_with, Difference, GradCheckOptions, GradCheckReport};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{self, LayerNormSaved, Real, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        saved: LayerNormSaved<T>,
    },
    Softmax(Var),
    Gelu(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Dot(Var, Var),
    MeanRows(Var),
    L2Normalize {
        x: Var,
        norm: T,
    },
    SelectRow {
        x: Var,
        row: usize,
    },
    Reshape(Var),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        probs: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// The computation record: nodes in execution order.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    params: Vec<Var>,
}

/// Gradients of a scalar objective, keyed by parameter leaf.
#[derive(Clone, Debug)]
pub struct GradientMap<T> {
    grads: BTreeMap<Var, Tensor<T>>,
}

impl<T: Real> GradientMap<T> {
    pub fn get(&self, param: Var) -> Option<&Tensor<T>> {
        self.grads.get(&param)
    }

    pub fn remove(&mut self, param: Var) -> Option<Tensor<T>> {
        self.grads.remove(&param)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor<T>)> {
        self.grads.iter().map(|(v, t)| (*v, t))
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    /// Number of recorded nodes, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a differentiable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.params.push(v);
        v
    }

    /// Adds a constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn record(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs = self.needs(inputs);
        self.push(value, op, needs)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.record(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::add(self.value(a), self.value(b))?;
        Ok(self.record(out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a bias row to every row of a matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = tensor::add_row(self.value(a), self.value(row))?;
        Ok(self.record(out, Op::AddRow(a, row), &[a, row]))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Result<Var> {
        let out = tensor::scale(self.value(a), s);
        Ok(self.record(out, Op::Scale(a, s), &[a]))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (out, saved) = tensor::layer_norm(self.value(x), self.value(gamma), self.value(beta))?;
        let op = Op::LayerNorm { x, gamma, beta, saved };
        Ok(self.record(out, op, &[x, gamma, beta]))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let out = tensor::softmax(self.value(x))?;
        Ok(self.record(out, Op::Softmax(x), &[x]))
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = tensor::gelu(self.value(x));
        Ok(self.record(out, Op::Gelu(x), &[x]))
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let out = tensor::embedding_lookup(self.value(table), ids)?;
        let op = Op::Embedding {
            table,
            ids: ids.to_vec(),
        };
        Ok(self.record(out, op, &[table]))
    }

    /// Inner product of two equally shaped tensors, as a scalar node.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = Tensor::scalar(tensor::dot(self.value(a), self.value(b))?);
        Ok(self.record(out, Op::Dot(a, b), &[a, b]))
    }

    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let out = tensor::mean_rows(self.value(x))?;
        Ok(self.record(out, Op::MeanRows(x), &[x]))
    }

    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        let norm = self.value(x).norm();
        let out = tensor::l2_normalize(self.value(x))?;
        Ok(self.record(out, Op::L2Normalize { x, norm }, &[x]))
    }

    pub fn select_row(&mut self, x: Var, row: usize) -> Result<Var> {
        let out = tensor::select_row(self.value(x), row)?;
        Ok(self.record(out, Op::SelectRow { x, row }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).reshape(shape)?;
        Ok(self.record(out, Op::Reshape(x), &[x]))
    }

    pub fn causal_attention(&mut self, q: Var, k: Var, v: Var, heads: usize) -> Result<Var> {
        let (out, probs) = tensor::causal_attention(self.value(q), self.value(k), self.value(v), heads)?;
        let op = Op::Attention { q, k, v, heads, probs };
        Ok(self.record(out, op, &[q, k, v]))
    }

    /// Exact reverse-mode gradients of the scalar `objective` with respect
    /// to every parameter leaf. Unreached parameters get zero tensors.
    pub fn backward(&self, objective: Var) -> Result<GradientMap<T>> {
        let obj = &self.nodes[objective.0].value;
        if !obj.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar objective, got shape {:?}",
                obj.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=objective.0).map(|_| None).collect();
        grads[objective.0] = Some(Tensor::filled(obj.shape(), T::one()));

        for idx in (0..=objective.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            for (input, contrib) in self.local_grads(node, &g)? {
                if !self.nodes[input.0].needs_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.axpy(T::one(), &contrib)?,
                    slot @ None => *slot = Some(contrib),
                }
            }
        }

        let grads = self
            .params
            .iter()
            .map(|&p| {
                let g = grads
                    .get_mut(p.0)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(self.value(p).shape()));
                (p, g)
            })
            .collect();
        Ok(GradientMap { grads })
    }

    /// Vector-Jacobian products of one node with respect to its inputs.
    fn local_grads(&self, node: &Node<T>, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let val = |v: Var| self.value(v);
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut v = Vec::with_capacity(2);
                if wants(*a) {
                    v.push((*a, tensor::matmul_nt(g, val(*b))?));
                }
                if wants(*b) {
                    v.push((*b, tensor::matmul_tn(val(*a), g)?));
                }
                v
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::AddRow(a, row) => {
                let mut v = vec![(*a, g.clone())];
                if wants(*row) {
                    v.push((*row, column_sums(g)?));
                }
                v
            }
            Op::Scale(a, s) => vec![(*a, tensor::scale(g, *s))],
            Op::LayerNorm { x, gamma, beta, saved } => layer_norm_backward(g, val(*gamma), saved, *x, *gamma, *beta)?,
            Op::Softmax(x) => {
                let y = &node.value;
                let d = *y.shape().last().unwrap_or(&1);
                let mut dx = Vec::with_capacity(y.len());
                for (yr, gr) in y.data().chunks(d).zip(g.data().chunks(d)) {
                    let s = tensor::dot_slices(yr, gr);
                    dx.extend(yr.iter().zip(gr).map(|(&yi, &gi)| yi * (gi - s)));
                }
                vec![(*x, Tensor::new(y.shape().to_vec(), dx)?)]
            }
            Op::Gelu(x) => {
                let xv = val(*x);
                let dx = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xi, &gi)| gi * tensor::gelu_derivative(xi))
                    .collect();
                vec![(*x, Tensor::new(xv.shape().to_vec(), dx)?)]
            }
            Op::Embedding { table, ids } => {
                let tv = val(*table);
                let d = tv.shape()[1];
                let mut dt = Tensor::zeros(tv.shape());
                let buf = dt.data_mut();
                for (r, &id) in ids.iter().enumerate() {
                    for (o, &gi) in buf[id * d..(id + 1) * d].iter_mut().zip(g.row(r)) {
                        *o = *o + gi;
                    }
                }
                vec![(*table, dt)]
            }
            Op::Dot(a, b) => {
                let s = g.item()?;
                vec![(*a, tensor::scale(val(*b), s)), (*b, tensor::scale(val(*a), s))]
            }
            Op::MeanRows(x) => {
                let xv = val(*x);
                let m = xv.shape()[0];
                let inv = T::one() / T::of(m as f64);
                let mut dx = Vec::with_capacity(xv.len());
                for _ in 0..m {
                    dx.extend(g.data().iter().map(|&gi| gi * inv));
                }
                vec![(*x, Tensor::new(xv.shape().to_vec(), dx)?)]
            }
            Op::L2Normalize { x, norm } => {
                let y = &node.value;
                let s = tensor::dot_slices(y.data(), g.data());
                let dx = y
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&yi, &gi)| (gi - yi * s) / *norm)
                    .collect();
                vec![(*x, Tensor::new(y.shape().to_vec(), dx)?)]
            }
            Op::SelectRow { x, row } => {
                let xv = val(*x);
                let n = xv.shape()[1];
                let mut dx = Tensor::zeros(xv.shape());
                dx.data_mut()[row * n..(row + 1) * n].copy_from_slice(g.data());
                vec![(*x, dx)]
            }
            Op::Reshape(x) => vec![(*x, g.reshape(val(*x).shape().to_vec())?)],
            Op::Attention { q, k, v, heads, probs } => {
                attention_backward(g, val(*q), val(*k), val(*v), *heads, probs, (*q, *k, *v))?
            }
        };
        Ok(out)
    }
}

fn column_sums<T: Real>(g: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = g
        .matrix_dims()
        .ok_or_else(|| Error::Contract("column sums of a non-matrix".into()))?;
    let mut acc = vec![T::zero(); n];
    for r in 0..m {
        for (a, &x) in acc.iter_mut().zip(g.row(r)) {
            *a = *a + x;
        }
    }
    Ok(Tensor::from_vec(acc))
}

fn layer_norm_backward<T: Real>(
    g: &Tensor<T>,
    gamma: &Tensor<T>,
    saved: &LayerNormSaved<T>,
    x: Var,
    gamma_var: Var,
    beta_var: Var,
) -> Result<Vec<(Var, Tensor<T>)>> {
    let d = gamma.len();
    let xhat = saved.normalized.data();
    let gd = g.data();
    let inv_d = T::one() / T::of(d as f64);
    let mut dgamma = vec![T::zero(); d];
    let mut dbeta = vec![T::zero(); d];
    let mut dx = Vec::with_capacity(g.len());
    let mut dxhat = vec![T::zero(); d];
    for (r, &rstd) in saved.inv_std.iter().enumerate() {
        let (gr, hr) = (&gd[r * d..(r + 1) * d], &xhat[r * d..(r + 1) * d]);
        let mut mean_dh = T::zero();
        let mut mean_dh_h = T::zero();
        for j in 0..d {
            dgamma[j] = dgamma[j] + gr[j] * hr[j];
            dbeta[j] = dbeta[j] + gr[j];
            dxhat[j] = gr[j] * gamma.data()[j];
            mean_dh = mean_dh + dxhat[j];
            mean_dh_h = mean_dh_h + dxhat[j] * hr[j];
        }
        mean_dh = mean_dh * inv_d;
        mean_dh_h = mean_dh_h * inv_d;
        for j in 0..d {
            dx.push(rstd * (dxhat[j] - mean_dh - hr[j] * mean_dh_h));
        }
    }
    Ok(vec![
        (x, Tensor::new(g.shape().to_vec(), dx)?),
        (gamma_var, Tensor::from_vec(dgamma)),
        (beta_var, Tensor::from_vec(dbeta)),
    ])
}

fn attention_backward<T: Real>(
    g: &Tensor<T>,
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    probs: &[T],
    vars: (Var, Var, Var),
) -> Result<Vec<(Var, Tensor<T>)>> {
    let (n, d) = (q.shape()[0], q.shape()[1]);
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (qd, kd, vd, gd) = (q.data(), k.data(), v.data(), g.data());
    let mut dq = vec![T::zero(); n * d];
    let mut dk = vec![T::zero(); n * d];
    let mut dv = vec![T::zero(); n * d];
    let mut dp = vec![T::zero(); n];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            let prow = &probs[(h * n + i) * n..(h * n + i) * n + n];
            let gi = &gd[i * d + off..i * d + off + dh];
            let mut weighted = T::zero();
            for j in 0..=i {
                let vj = &vd[j * d + off..j * d + off + dh];
                dp[j] = tensor::dot_slices(gi, vj);
                weighted = weighted + prow[j] * dp[j];
                let dvj = &mut dv[j * d + off..j * d + off + dh];
                for (o, &x) in dvj.iter_mut().zip(gi) {
                    *o = *o + prow[j] * x;
                }
            }
            for j in 0..=i {
                let ds = prow[j] * (dp[j] - weighted) * scale;
                if ds == T::zero() {
                    continue;
                }
                for c in 0..dh {
                    dq[i * d + off + c] = dq[i * d + off + c] + ds * kd[j * d + off + c];
                    dk[j * d + off + c] = dk[j * d + off + c] + ds * qd[i * d + off + c];
                }
            }
        }
    }
    let shape = q.shape().to_vec();
    Ok(vec![
        (vars.0, Tensor::new(shape.clone(), dq)?),
        (vars.1, Tensor::new(shape.clone(), dk)?),
        (vars.2, Tensor::new(shape, dv)?),
    ])
}
