use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stream_rng, Dataset, STREAM_TOY_DATA};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Two uniformly filled, non-overlapping discs. Class 0 is drawn from
/// `center_a`, class 1 from `center_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTaskSpec {
    pub center_a: [f64; 2],
    pub center_b: [f64; 2],
    pub radius: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

impl Default for ToyTaskSpec {
    fn default() -> Self {
        Self {
            center_a: [-2.0, 0.0],
            center_b: [2.0, 0.0],
            radius: 1.2,
            n_per_class: 100,
            seed: 0,
        }
    }
}

impl ToyTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidSpec(format!("radius must be positive, got {}", self.radius)));
        }
        let [ax, ay] = self.center_a;
        let [bx, by] = self.center_b;
        if ![ax, ay, bx, by].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSpec("disc centers must be finite".into()));
        }
        let gap = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        if gap <= 2.0 * self.radius {
            return Err(Error::InvalidSpec(format!(
                "discs overlap: center distance {gap} <= 2 * radius {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Samples `n_per_class` points uniformly inside each disc.
///
/// Class-0 points come first (ids `0..n`), then class-1 points.
pub fn make_two_clouds<S: Scalar>(spec: &ToyTaskSpec) -> Result<Dataset<S>> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, STREAM_TOY_DATA);
    let n = spec.n_per_class;
    let mut features = Vec::with_capacity(4 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for (label, center) in [(0usize, spec.center_a), (1, spec.center_b)] {
        for _ in 0..n {
            // sqrt of a uniform radius fraction gives uniform area density
            let r = spec.radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            features.push(S::from_f64_lossy(center[0] + r * theta.cos()));
            features.push(S::from_f64_lossy(center[1] + r * theta.sin()));
            labels.push(label);
        }
    }
    Dataset::new(features, 2, labels, 2)
}
