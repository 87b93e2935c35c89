use super::{Real, Tensor, LAYER_NORM_EPS, NORMALIZE_TOLERANCE};
use crate::error::{Error, Result};

fn dims2<T: Real>(t: &Tensor<T>, context: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::Contract(format!(
            "{context}: expected a matrix, got shape {other:?}"
        ))),
    }
}

/// Standard matrix product of `[m×k]` and `[k×n]`.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = dims2(a, "matmul")?;
    let (k2, n) = dims2(b, "matmul")?;
    if k != k2 {
        return Err(Error::dim("matmul inner dimensions", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + aip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `aᵀ·b` for `[k×m]` and `[k×n]`, giving `[m×n]`.
pub fn matmul_tn<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (k, m) = dims2(a, "matmul_tn")?;
    let (k2, n) = dims2(b, "matmul_tn")?;
    if k != k2 {
        return Err(Error::dim("matmul_tn", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![T::zero(); m * n];
    for p in 0..k {
        let brow = &bd[p * n..(p + 1) * n];
        for i in 0..m {
            let api = ad[p * m + i];
            if api == T::zero() {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + api * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `a·bᵀ` for `[m×k]` and `[n×k]`, giving `[m×n]`.
pub fn matmul_nt<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = dims2(a, "matmul_nt")?;
    let (n, k2) = dims2(b, "matmul_nt")?;
    if k != k2 {
        return Err(Error::dim("matmul_nt", a.shape(), b.shape()));
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            out.push(dot_slices(a.row(i), b.row(j)));
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Matrix-vector product `[m×n]·[n] -> [m]`.
pub fn matvec<T: Real>(a: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dims2(a, "matvec")?;
    if x.shape() != [n] {
        return Err(Error::dim("matvec", a.shape(), x.shape()));
    }
    let out = (0..m).map(|i| dot_slices(a.row(i), x.data())).collect();
    Ok(Tensor::from_vec(out))
}

pub(crate) fn dot_slices<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::dim("add", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Adds a `[n]` row vector to every row of a `[m×n]` matrix.
pub fn add_row<T: Real>(a: &Tensor<T>, row: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, n) = dims2(a, "add_row")?;
    if row.shape() != [n] {
        return Err(Error::dim("add_row", a.shape(), row.shape()));
    }
    let rd = row.data();
    let data = a.data().iter().enumerate().map(|(i, &x)| x + rd[i % n]).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn scale<T: Real>(a: &Tensor<T>, s: T) -> Tensor<T> {
    let data = a.data().iter().map(|&x| x * s).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

pub fn map<T: Real>(a: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    let data = a.data().iter().map(|&x| f(x)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

pub fn dot<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(Error::dim("dot", a.shape(), b.shape()));
    }
    Ok(dot_slices(a.data(), b.data()))
}

/// Mean over the rows of a matrix, `[m×n] -> [n]`.
pub fn mean_rows<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dims2(a, "mean_rows")?;
    let mut acc = vec![T::zero(); n];
    for r in 0..m {
        for (s, &x) in acc.iter_mut().zip(a.row(r)) {
            *s = *s + x;
        }
    }
    let inv = T::one() / T::of(m as f64);
    Ok(Tensor::from_vec(acc.into_iter().map(|s| s * inv).collect()))
}

/// Divides by the L2 norm. Fails when the norm is below
/// [`NORMALIZE_TOLERANCE`].
pub fn l2_normalize<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let norm = a.norm();
    if norm.to_f64_lossy().is_nan() || norm.to_f64_lossy() < NORMALIZE_TOLERANCE {
        return Err(Error::Degenerate(format!("cannot normalize a vector of norm {norm}")));
    }
    Ok(map(a, |x| x / norm))
}

/// Statistics saved by [`layer_norm`] for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerNormSaved<T> {
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
}

/// Layer normalization over the last axis with affine gain and bias.
pub fn layer_norm<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> Result<(Tensor<T>, LayerNormSaved<T>)> {
    let d = *x
        .shape()
        .last()
        .ok_or_else(|| Error::Contract("layer_norm on a scalar".into()))?;
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(Error::dim("layer_norm affine", x.shape(), gamma.shape()));
    }
    let rows = x.len() / d;
    let inv_d = T::one() / T::of(d as f64);
    let eps = T::of(LAYER_NORM_EPS);
    let mut xhat = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x.data()[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let rstd = T::one() / (var + eps).sqrt();
        inv_std.push(rstd);
        for (j, &v) in row.iter().enumerate() {
            let h = (v - mean) * rstd;
            xhat.push(h);
            out.push(h * gamma.data()[j] + beta.data()[j]);
        }
    }
    let shape = x.shape().to_vec();
    Ok((
        Tensor::new(shape.clone(), out)?,
        LayerNormSaved {
            normalized: Tensor::new(shape, xhat)?,
            inv_std,
        },
    ))
}

/// Softmax along the last axis.
pub fn softmax<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let d = *x
        .shape()
        .last()
        .ok_or_else(|| Error::Contract("softmax on a scalar".into()))?;
    let mut out = Vec::with_capacity(x.len());
    for row in x.data().chunks(d) {
        softmax_into(row, &mut out);
    }
    Tensor::new(x.shape().to_vec(), out)
}

fn softmax_into<T: Real>(row: &[T], out: &mut Vec<T>) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let start = out.len();
    let mut total = T::zero();
    for &v in row {
        let e = (v - max).exp();
        total = total + e;
        out.push(e);
    }
    for e in &mut out[start..] {
        *e = *e / total;
    }
}

const GELU_C: f64 = 0.044_715;

fn gelu_k<T: Real>() -> T {
    T::of((2.0 / std::f64::consts::PI).sqrt())
}

/// GELU, tanh approximation.
pub fn gelu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (k, c, half) = (gelu_k::<T>(), T::of(GELU_C), T::of(0.5));
    map(x, |v| half * v * (T::one() + (k * (v + c * v * v * v)).tanh()))
}

pub(crate) fn gelu_derivative<T: Real>(v: T) -> T {
    let (k, c, half) = (gelu_k::<T>(), T::of(GELU_C), T::of(0.5));
    let t = (k * (v + c * v * v * v)).tanh();
    half * (T::one() + t) + half * v * (T::one() - t * t) * k * (T::one() + T::of(3.0) * c * v * v)
}

/// Gathers rows of `table` (`[V×D]`) by id, giving `[ids.len()×D]`.
pub fn embedding_lookup<T: Real>(table: &Tensor<T>, ids: &[usize]) -> Result<Tensor<T>> {
    let (v, d) = dims2(table, "embedding_lookup")?;
    if ids.is_empty() {
        return Err(Error::Contract("embedding_lookup with no ids".into()));
    }
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(Error::Contract(format!(
                "embedding id {id} out of range for table of {v} rows"
            )));
        }
        out.extend_from_slice(table.row(id));
    }
    Tensor::new(vec![ids.len(), d], out)
}

/// Extracts row `r` of a matrix as a `[1×n]` matrix.
pub fn select_row<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (m, n) = dims2(x, "select_row")?;
    if r >= m {
        return Err(Error::Contract(format!("row {r} out of range for {m} rows")));
    }
    Tensor::new(vec![1, n], x.row(r).to_vec())
}

/// Multi-head causal self-attention over already-projected `q`, `k`, `v`
/// (each `[n×d]`). Returns the attended values and the per-head
/// probability matrices (`heads × n × n`, row-major, zero above the
/// diagonal).
pub fn causal_attention<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
) -> Result<(Tensor<T>, Vec<T>)> {
    let (n, d) = dims2(q, "attention")?;
    if k.shape() != q.shape() || v.shape() != q.shape() {
        return Err(Error::dim("attention q/k/v", q.shape(), k.shape()));
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!("{heads} heads do not divide width {d}")));
    }
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    let mut probs = vec![T::zero(); heads * n * n];
    let mut out = vec![T::zero(); n * d];
    let mut scores = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n);
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            scores.clear();
            let qi = &qd[i * d + off..i * d + off + dh];
            for j in 0..=i {
                let kj = &kd[j * d + off..j * d + off + dh];
                scores.push(dot_slices(qi, kj) * scale);
            }
            row.clear();
            softmax_into(&scores, &mut row);
            let prow = &mut probs[(h * n + i) * n..(h * n + i) * n + n];
            prow[..=i].copy_from_slice(&row);
            let oi = &mut out[i * d + off..i * d + off + dh];
            for (j, &p) in row.iter().enumerate() {
                let vj = &vd[j * d + off..j * d + off + dh];
                for (o, &x) in oi.iter_mut().zip(vj) {
                    *o = *o + p * x;
                }
            }
        }
    }
    Ok((Tensor::new(vec![n, d], out)?, probs))
}
