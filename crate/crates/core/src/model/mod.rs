//! Trainable models: the two-weight linear toy classifier and the
//! one-hidden-layer leaky-ReLU MLP, both regressed onto their targets with MSE.

mod mlp;
mod toy;

pub use mlp::{backward_mlp, forward_mlp, init_mlp, MlpActivations, MlpGradients, MlpModel, DEFAULT_NEGATIVE_SLOPE};
pub use toy::{backward_toy, heaviside, LinearToyModel, ToyGradients, ToyTargets};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Interface the trainer drives. A presentation is one forward pass into a
/// reusable activation buffer; when the gate lets the sample through, the
/// same activations feed the backward pass.
pub trait Model<S: Scalar>: Clone + Send + Sync {
    type Activations: Send;

    fn new_activations(&self) -> Self::Activations;

    fn input_dim(&self) -> usize;

    fn n_classes(&self) -> usize;

    fn forward_into(&self, x: &[S], act: &mut Self::Activations) -> Result<()>;

    fn predicted_class(&self, act: &Self::Activations) -> usize;

    /// Loss of the cached forward pass against class `label`.
    fn sample_loss(&self, act: &Self::Activations, label: usize) -> S;

    /// Backpropagates from `act`, applies `w ← w − lr·g` to every parameter
    /// and returns `Σ_i |w_i(new) − w_i(old)|` in `f64`.
    fn apply_sgd(&mut self, x: &[S], act: &Self::Activations, label: usize, lr: S) -> Result<f64>;

    /// All parameters in a fixed canonical order.
    fn parameters(&self) -> Vec<S>;

    fn checkpoint(&self) -> ModelCheckpoint;
}

/// Mean over the output dimension of the squared error.
pub fn mse_loss<S: Scalar>(output: &[S], target: &[S]) -> Result<S> {
    if output.len() != target.len() {
        return Err(Error::Shape(format!(
            "output has {} entries, target {}",
            output.len(),
            target.len()
        )));
    }
    if output.is_empty() {
        return Err(Error::Shape("mse of empty vectors".into()));
    }
    let sum: S = output.iter().zip(target).map(|(&o, &t)| (o - t) * (o - t)).sum();
    Ok(sum / S::from_usize(output.len()).unwrap())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One-hot encoding of `class` over `n` classes.
pub fn one_hot<S: Scalar>(class: usize, n: usize) -> Vec<S> {
    let mut v = vec![S::zero(); n];
    v[class] = S::one();
    v
}

/// Serialized model: shape metadata plus row-major `f64` parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelCheckpoint {
    Toy {
        targets: ToyTargets,
        w: [f64; 2],
    },
    Mlp {
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        negative_slope: f64,
        /// hidden × in, row-major
        w1: Vec<f64>,
        b1: Vec<f64>,
        /// out × hidden, row-major
        w2: Vec<f64>,
        b2: Vec<f64>,
    },
}

impl ModelCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
