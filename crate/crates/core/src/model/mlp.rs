use rand::Rng;

use super::{argmax, ModelCheckpoint, Model};
use crate::datasets::{stream_rng, STREAM_INIT};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_NEGATIVE_SLOPE: f64 = 0.01;

/// One hidden layer with leaky-ReLU activation and a linear output layer.
///
/// `w1` is conceptually `hidden × in` but is stored input-major
/// (`w1t[i * hidden + j]` holds `w1[j][i]`): the forward pass then becomes a
/// sum of columns scaled by the non-zero inputs, and the backward update of
/// that layer only touches the columns of non-zero inputs. `w2` is stored
/// row-major `out × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<S> {
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    w1t: Vec<S>,
    b1: Vec<S>,
    w2: Vec<S>,
    b2: Vec<S>,
    negative_slope: S,
}

/// Gradients in the public (row-major) layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients<S> {
    /// hidden × in
    pub w1: Vec<S>,
    pub b1: Vec<S>,
    /// out × hidden
    pub w2: Vec<S>,
    pub b2: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpActivations<S> {
    pub hidden_pre: Vec<S>,
    pub hidden_post: Vec<S>,
    pub output: Vec<S>,
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
pub fn init_mlp<S: Scalar>(in_dim: usize, hidden_dim: usize, out_dim: usize, seed: u64) -> Result<MlpModel<S>> {
    if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidSpec(format!(
            "MLP dims must be positive, got {in_dim}x{hidden_dim}x{out_dim}"
        )));
    }
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut uniform = |fan_in: usize, n: usize| -> Vec<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
    };
    // draw order: w1 (row-major), b1, w2, b2
    let w1 = uniform(in_dim, hidden_dim * in_dim);
    let b1 = uniform(in_dim, hidden_dim);
    let w2 = uniform(hidden_dim, out_dim * hidden_dim);
    let b2 = uniform(hidden_dim, out_dim);
    MlpModel::from_parts(in_dim, hidden_dim, out_dim, DEFAULT_NEGATIVE_SLOPE, &w1, &b1, &w2, &b2)
}

fn to_s<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::from_f64_lossy(x)).collect()
}

fn to_f64<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|&x| x.as_f64()).collect()
}

#[inline]
fn leaky<S: Scalar>(v: S, slope: S) -> S {
    if v > S::zero() {
        v
    } else {
        v * slope
    }
}

#[inline]
fn leaky_grad<S: Scalar>(v: S, slope: S) -> S {
    if v > S::zero() {
        S::one()
    } else {
        slope
    }
}

/// `dst[j] -= lr * (scale[j] * x)` over the slice, returning the exact
/// `Σ |new − old|` with four fixed-order partial sums.
#[inline]
fn descend_scaled<S: Scalar>(dst: &mut [S], lr: S, scale: &[S], x: S) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut d_chunks = dst.chunks_exact_mut(4);
    let mut s_chunks = scale.chunks_exact(4);
    for (d, s) in (&mut d_chunks).zip(&mut s_chunks) {
        for k in 0..4 {
            let old = d[k];
            d[k] = old - lr * (s[k] * x);
            acc[k] += (d[k].as_f64() - old.as_f64()).abs();
        }
    }
    let mut tail = 0.0;
    for (d, &s) in d_chunks.into_remainder().iter_mut().zip(s_chunks.remainder()) {
        let old = *d;
        *d = old - lr * (s * x);
        tail += (d.as_f64() - old.as_f64()).abs();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl<S: Scalar> MlpModel<S> {
    /// Builds a model from row-major (`hidden × in`, `out × hidden`) arrays.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        negative_slope: f64,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
    ) -> Result<Self> {
        if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidSpec("MLP dims must be positive".into()));
        }
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Shape(format!("{name} has {got} entries, expected {want}")))
            }
        };
        check("w1", w1.len(), hidden_dim * in_dim)?;
        check("b1", b1.len(), hidden_dim)?;
        check("w2", w2.len(), out_dim * hidden_dim)?;
        check("b2", b2.len(), out_dim)?;
        if ![w1, b1, w2, b2].iter().all(|p| p.iter().all(|v| v.is_finite())) || !negative_slope.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        let mut w1t = vec![S::zero(); in_dim * hidden_dim];
        for j in 0..hidden_dim {
            for i in 0..in_dim {
                w1t[i * hidden_dim + j] = S::from_f64_lossy(w1[j * in_dim + i]);
            }
        }
        Ok(Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1t,
            b1: to_s(b1),
            w2: to_s(w2),
            b2: to_s(b2),
            negative_slope: S::from_f64_lossy(negative_slope),
        })
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        match ck {
            ModelCheckpoint::Mlp {
                in_dim,
                hidden_dim,
                out_dim,
                negative_slope,
                w1,
                b1,
                w2,
                b2,
            } => Self::from_parts(*in_dim, *hidden_dim, *out_dim, *negative_slope, w1, b1, w2, b2),
            ModelCheckpoint::Toy { .. } => Err(Error::InvalidInput("checkpoint holds a toy model".into())),
        }
    }

    pub fn with_negative_slope(mut self, slope: S) -> Self {
        self.negative_slope = slope;
        self
    }

    /// A model with every parameter zero.
    pub fn zeros(in_dim: usize, hidden_dim: usize, out_dim: usize) -> Result<Self> {
        Self::from_parts(
            in_dim,
            hidden_dim,
            out_dim,
            DEFAULT_NEGATIVE_SLOPE,
            &vec![0.0; hidden_dim * in_dim],
            &vec![0.0; hidden_dim],
            &vec![0.0; out_dim * hidden_dim],
            &vec![0.0; out_dim],
        )
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn negative_slope(&self) -> S {
        self.negative_slope
    }

    /// `w1[j][i]`: weight from input `i` to hidden unit `j`.
    #[inline]
    pub fn w1(&self, j: usize, i: usize) -> S {
        self.w1t[i * self.hidden_dim + j]
    }

    #[inline]
    pub fn w2(&self, k: usize, j: usize) -> S {
        self.w2[k * self.hidden_dim + j]
    }

    pub fn b1(&self) -> &[S] {
        &self.b1
    }

    pub fn b2(&self) -> &[S] {
        &self.b2
    }

    /// `w1` as a row-major `hidden × in` array.
    pub fn w1_row_major(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.w1t.len());
        for j in 0..self.hidden_dim {
            for i in 0..self.in_dim {
                out.push(self.w1(j, i));
            }
        }
        out
    }

    pub fn w2_row_major(&self) -> &[S] {
        &self.w2
    }

    pub fn n_parameters(&self) -> usize {
        self.w1t.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Mutable access to each parameter in canonical order; for tests that
    /// perturb single entries.
    pub fn parameter_mut(&mut self, index: usize) -> &mut S {
        let n1 = self.w1t.len();
        let n2 = n1 + self.b1.len();
        let n3 = n2 + self.w2.len();
        if index < n1 {
            let (j, i) = (index / self.in_dim, index % self.in_dim);
            &mut self.w1t[i * self.hidden_dim + j]
        } else if index < n2 {
            &mut self.b1[index - n1]
        } else if index < n3 {
            &mut self.w2[index - n2]
        } else {
            &mut self.b2[index - n3]
        }
    }

    /// `w ← w − lr·g` over all parameters; returns the exact L1 step length.
    pub fn apply_gradients(&mut self, g: &MlpGradients<S>, lr: S) -> Result<f64> {
        if g.w1.len() != self.w1t.len()
            || g.b1.len() != self.b1.len()
            || g.w2.len() != self.w2.len()
            || g.b2.len() != self.b2.len()
        {
            return Err(Error::Shape("gradient shapes do not match the model".into()));
        }
        let mut delta = 0.0;
        let mut step = |p: &mut S, gv: S| {
            let old = *p;
            *p = old - lr * gv;
            delta += (p.as_f64() - old.as_f64()).abs();
        };
        for j in 0..self.hidden_dim {
            for i in 0..self.in_dim {
                step(&mut self.w1t[i * self.hidden_dim + j], g.w1[j * self.in_dim + i]);
            }
        }
        for (p, &gv) in self.b1.iter_mut().zip(&g.b1) {
            step(p, gv);
        }
        for (p, &gv) in self.w2.iter_mut().zip(&g.w2) {
            step(p, gv);
        }
        for (p, &gv) in self.b2.iter_mut().zip(&g.b2) {
            step(p, gv);
        }
        Ok(delta)
    }

    /// `∂L/∂output` and `∂L/∂hidden_pre` for one sample.
    fn deltas(&self, act: &MlpActivations<S>, label: usize) -> (Vec<S>, Vec<S>) {
        let k_inv = S::from_f64_lossy(2.0) / S::from_usize(self.out_dim).unwrap();
        let d_out: Vec<S> = act
            .output
            .iter()
            .enumerate()
            .map(|(k, &o)| {
                let t = if k == label { S::one() } else { S::zero() };
                k_inv * (o - t)
            })
            .collect();
        let mut d_pre = vec![S::zero(); self.hidden_dim];
        for (k, &dk) in d_out.iter().enumerate() {
            let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            for (d, &w) in d_pre.iter_mut().zip(row) {
                *d += w * dk;
            }
        }
        for (d, &pre) in d_pre.iter_mut().zip(&act.hidden_pre) {
            *d *= leaky_grad(pre, self.negative_slope);
        }
        (d_out, d_pre)
    }
}

/// `hidden_pre = w1·x + b1`, `hidden_post = leaky_relu(hidden_pre)`,
/// `output = w2·hidden_post + b2`.
pub fn forward_mlp<S: Scalar>(m: &MlpModel<S>, x: &[S]) -> Result<MlpActivations<S>> {
    let mut act = m.new_activations();
    m.forward_into(x, &mut act)?;
    Ok(act)
}

/// Analytic gradient of `mse_loss(forward_mlp(x), one_hot(label))`, with the loss.
pub fn backward_mlp<S: Scalar>(m: &MlpModel<S>, x: &[S], target_onehot: &[S]) -> Result<(MlpGradients<S>, S)> {
    if target_onehot.len() != m.out_dim {
        return Err(Error::Shape(format!(
            "target has {} entries, model has {} outputs",
            target_onehot.len(),
            m.out_dim
        )));
    }
    let act = forward_mlp(m, x)?;
    let k_inv = S::from_f64_lossy(2.0) / S::from_usize(m.out_dim).unwrap();
    let d_out: Vec<S> = act
        .output
        .iter()
        .zip(target_onehot)
        .map(|(&o, &t)| k_inv * (o - t))
        .collect();
    let mut d_pre = vec![S::zero(); m.hidden_dim];
    for (k, &dk) in d_out.iter().enumerate() {
        for (j, d) in d_pre.iter_mut().enumerate() {
            *d += m.w2(k, j) * dk;
        }
    }
    for (d, &pre) in d_pre.iter_mut().zip(&act.hidden_pre) {
        *d *= leaky_grad(pre, m.negative_slope);
    }
    let mut w1 = vec![S::zero(); m.hidden_dim * m.in_dim];
    for (j, &dj) in d_pre.iter().enumerate() {
        for (i, &xi) in x.iter().enumerate() {
            w1[j * m.in_dim + i] = dj * xi;
        }
    }
    let mut w2 = vec![S::zero(); m.out_dim * m.hidden_dim];
    for (k, &dk) in d_out.iter().enumerate() {
        for (j, &hj) in act.hidden_post.iter().enumerate() {
            w2[k * m.hidden_dim + j] = dk * hj;
        }
    }
    let loss = super::mse_loss(&act.output, target_onehot)?;
    let grads = MlpGradients {
        w1,
        b1: d_pre,
        w2,
        b2: d_out,
    };
    let finite = grads.w1.iter().chain(&grads.b1).chain(&grads.w2).chain(&grads.b2).all(|v| v.is_finite());
    if !finite || !loss.is_finite() {
        return Err(Error::Numeric("non-finite gradient in MLP backward pass".into()));
    }
    Ok((grads, loss))
}

impl<S: Scalar> Model<S> for MlpModel<S> {
    type Activations = MlpActivations<S>;

    fn new_activations(&self) -> MlpActivations<S> {
        MlpActivations {
            hidden_pre: vec![S::zero(); self.hidden_dim],
            hidden_post: vec![S::zero(); self.hidden_dim],
            output: vec![S::zero(); self.out_dim],
        }
    }

    fn input_dim(&self) -> usize {
        self.in_dim
    }

    fn n_classes(&self) -> usize {
        self.out_dim
    }

    fn forward_into(&self, x: &[S], act: &mut MlpActivations<S>) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::Shape(format!("input has {} dims, model expects {}", x.len(), self.in_dim)));
        }
        let h = self.hidden_dim;
        act.hidden_pre.copy_from_slice(&self.b1);
        for (i, &xi) in x.iter().enumerate() {
            // xi * w is an exact (signed) zero when xi == 0
            if xi == S::zero() {
                continue;
            }
            let col = &self.w1t[i * h..(i + 1) * h];
            for (acc, &w) in act.hidden_pre.iter_mut().zip(col) {
                *acc += w * xi;
            }
        }
        for (post, &pre) in act.hidden_post.iter_mut().zip(&act.hidden_pre) {
            *post = leaky(pre, self.negative_slope);
        }
        for (k, out) in act.output.iter_mut().enumerate() {
            let row = &self.w2[k * h..(k + 1) * h];
            let mut acc = self.b2[k];
            for (&w, &v) in row.iter().zip(&act.hidden_post) {
                acc += w * v;
            }
            *out = acc;
        }
        Ok(())
    }

    fn predicted_class(&self, act: &MlpActivations<S>) -> usize {
        argmax(&act.output)
    }

    fn sample_loss(&self, act: &MlpActivations<S>, label: usize) -> S {
        let sum: S = act
            .output
            .iter()
            .enumerate()
            .map(|(k, &o)| {
                let r = if k == label { o - S::one() } else { o };
                r * r
            })
            .sum();
        sum / S::from_usize(self.out_dim).unwrap()
    }

    fn apply_sgd(&mut self, x: &[S], act: &MlpActivations<S>, label: usize, lr: S) -> Result<f64> {
        if act.output.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        let (d_out, d_pre) = self.deltas(act, label);
        let h = self.hidden_dim;
        let mut delta = 0.0;
        // canonical order: w1, b1, w2, b2
        for (i, &xi) in x.iter().enumerate() {
            if xi == S::zero() {
                continue;
            }
            delta += descend_scaled(&mut self.w1t[i * h..(i + 1) * h], lr, &d_pre, xi);
        }
        delta += descend_scaled(&mut self.b1, lr, &d_pre, S::one());
        for (k, &dk) in d_out.iter().enumerate() {
            let row = &mut self.w2[k * h..(k + 1) * h];
            let mut acc = 0.0;
            for (w, &hj) in row.iter_mut().zip(&act.hidden_post) {
                let old = *w;
                *w = old - lr * (dk * hj);
                acc += (w.as_f64() - old.as_f64()).abs();
            }
            delta += acc;
        }
        delta += descend_scaled(&mut self.b2, lr, &d_out, S::one());
        if !delta.is_finite() {
            return Err(Error::Numeric("non-finite parameter update".into()));
        }
        Ok(delta)
    }

    fn parameters(&self) -> Vec<S> {
        let mut p = self.w1_row_major();
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.extend_from_slice(&self.b2);
        p
    }

    fn checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint::Mlp {
            in_dim: self.in_dim,
            hidden_dim: self.hidden_dim,
            out_dim: self.out_dim,
            negative_slope: self.negative_slope.as_f64(),
            w1: to_f64(&self.w1_row_major()),
            b1: to_f64(&self.b1),
            w2: to_f64(&self.w2),
            b2: to_f64(&self.b2),
        }
    }
}
