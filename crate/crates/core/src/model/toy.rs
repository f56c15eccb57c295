use serde::{Deserialize, Serialize};

use super::{ModelCheckpoint, Model};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Regression targets for the two toy classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyTargets {
    /// class 0 → 0, class 1 → 1
    ZeroOne,
    /// class 0 → −1, class 1 → +1
    #[default]
    Signed,
}

impl ToyTargets {
    pub fn value<S: Scalar>(self, class: usize) -> S {
        match (self, class) {
            (_, 1) => S::one(),
            (ToyTargets::ZeroOne, _) => S::zero(),
            (ToyTargets::Signed, _) => -S::one(),
        }
    }
}

impl std::str::FromStr for ToyTargets {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-one" | "01" => Ok(ToyTargets::ZeroOne),
            "signed" | "pm1" => Ok(ToyTargets::Signed),
            other => Err(Error::InvalidInput(format!("unknown toy target encoding '{other}'"))),
        }
    }
}

/// Heaviside step with `H(0) = 1`.
#[inline]
pub fn heaviside<S: Scalar>(h: S) -> usize {
    usize::from(h >= S::zero())
}

/// Two weights, no bias: `h = w·x`, class `H(h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearToyModel<S> {
    pub w: [S; 2],
    pub targets: ToyTargets,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyGradients<S> {
    pub w: [S; 2],
}

impl<S: Scalar> LinearToyModel<S> {
    pub fn new(w: [S; 2], targets: ToyTargets) -> Self {
        Self { w, targets }
    }

    #[inline]
    pub fn h(&self, x: &[S]) -> S {
        self.w[0] * x[0] + self.w[1] * x[1]
    }

    pub fn predict(&self, x: &[S]) -> usize {
        heaviside(self.h(x))
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        match ck {
            ModelCheckpoint::Toy { targets, w } => Ok(Self::new(
                [S::from_f64_lossy(w[0]), S::from_f64_lossy(w[1])],
                *targets,
            )),
            ModelCheckpoint::Mlp { .. } => Err(Error::InvalidInput("checkpoint holds an MLP".into())),
        }
    }

    /// Returns the exact L1 length of the step.
    pub fn apply_gradients(&mut self, g: &ToyGradients<S>, lr: S) -> f64 {
        let mut delta = 0.0;
        for (w, &gv) in self.w.iter_mut().zip(&g.w) {
            let old = *w;
            *w = old - lr * gv;
            delta += (w.as_f64() - old.as_f64()).abs();
        }
        delta
    }
}

/// `loss = (h − target)²`, `∂loss/∂w = 2(h − target)·x`.
pub fn backward_toy<S: Scalar>(m: &LinearToyModel<S>, x: &[S], target: S) -> Result<(ToyGradients<S>, S)> {
    if x.len() != 2 {
        return Err(Error::Shape(format!("toy input must be 2-dimensional, got {}", x.len())));
    }
    let r = m.h(x) - target;
    let two = S::one() + S::one();
    let g = ToyGradients {
        w: [two * r * x[0], two * r * x[1]],
    };
    if !(g.w[0].is_finite() && g.w[1].is_finite()) {
        return Err(Error::Numeric("non-finite toy gradient".into()));
    }
    Ok((g, r * r))
}

impl<S: Scalar> Model<S> for LinearToyModel<S> {
    /// `h = w·x`
    type Activations = S;

    fn new_activations(&self) -> S {
        S::zero()
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn n_classes(&self) -> usize {
        2
    }

    fn forward_into(&self, x: &[S], act: &mut S) -> Result<()> {
        if x.len() != 2 {
            return Err(Error::Shape(format!("toy input must be 2-dimensional, got {}", x.len())));
        }
        *act = self.h(x);
        Ok(())
    }

    fn predicted_class(&self, act: &S) -> usize {
        heaviside(*act)
    }

    fn sample_loss(&self, act: &S, label: usize) -> S {
        let r = *act - self.targets.value(label);
        r * r
    }

    fn apply_sgd(&mut self, x: &[S], act: &S, label: usize, lr: S) -> Result<f64> {
        let r = *act - self.targets.value::<S>(label);
        let two = S::one() + S::one();
        let g = ToyGradients {
            w: [two * r * x[0], two * r * x[1]],
        };
        if !(g.w[0].is_finite() && g.w[1].is_finite()) {
            return Err(Error::Numeric("non-finite toy gradient".into()));
        }
        let delta = self.apply_gradients(&g, lr);
        if !delta.is_finite() {
            return Err(Error::Numeric("non-finite toy update".into()));
        }
        Ok(delta)
    }

    fn parameters(&self) -> Vec<S> {
        self.w.to_vec()
    }

    fn checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint::Toy {
            targets: self.targets,
            w: [self.w[0].as_f64(), self.w[1].as_f64()],
        }
    }
}
