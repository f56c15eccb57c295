//! Datasets: IDX loading and export, the two-cloud toy task, and
//! deterministic presentation order.

mod idx;
mod toy;

pub use idx::{load_idx, load_idx_with, write_idx, IdxOptions, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use toy::{make_two_clouds, ToyTaskSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reserved ChaCha stream ids. Per-epoch shuffles use the epoch number as
/// the stream, so these sit at the top of the range.
pub(crate) const STREAM_INIT: u64 = u64::MAX;
pub(crate) const STREAM_TOY_DATA: u64 = u64::MAX - 1;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Feature matrix plus labels. Rows are stored contiguously (row-major).
///
/// `sample_ids` bind each row to its identity in the source dataset; they
/// survive subsetting so a coreset keeps pointing at the original samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    features: Vec<S>,
    n_dims: usize,
    labels: Vec<usize>,
    n_classes: usize,
    sample_ids: Vec<usize>,
    image_shape: Option<(usize, usize)>,
}

/// Role a dataset plays in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl<S: Scalar> Dataset<S> {
    /// Builds a dataset whose ids are `0..n`.
    pub fn new(features: Vec<S>, n_dims: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let ids = (0..labels.len()).collect();
        Self::with_ids(features, n_dims, labels, n_classes, ids)
    }

    pub fn with_ids(
        features: Vec<S>,
        n_dims: usize,
        labels: Vec<usize>,
        n_classes: usize,
        sample_ids: Vec<usize>,
    ) -> Result<Self> {
        if n_dims == 0 {
            return Err(Error::InvalidSpec("dataset must have at least one feature".into()));
        }
        if n_classes == 0 {
            return Err(Error::InvalidSpec("dataset must have at least one class".into()));
        }
        if features.len() != labels.len() * n_dims {
            return Err(Error::Consistency(format!(
                "{} feature values do not form {} rows of {} dims",
                features.len(),
                labels.len(),
                n_dims
            )));
        }
        if sample_ids.len() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} sample ids for {} labels",
                sample_ids.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Consistency(format!(
                "label {bad} outside [0, {n_classes})"
            )));
        }
        Ok(Self {
            features,
            n_dims,
            labels,
            n_classes,
            sample_ids,
            image_shape: None,
        })
    }

    /// Records the (rows, cols) image geometry, used when re-exporting as IDX.
    pub fn with_image_shape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.n_dims {
            return Err(Error::Shape(format!(
                "{rows}x{cols} image does not match {} dims",
                self.n_dims
            )));
        }
        self.image_shape = Some((rows, cols));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn features(&self) -> &[S] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[usize] {
        &self.sample_ids
    }

    /// Feature row at position `i`.
    #[inline]
    pub fn sample(&self, i: usize) -> &[S] {
        &self.features[i * self.n_dims..(i + 1) * self.n_dims]
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    #[inline]
    pub fn sample_id(&self, i: usize) -> usize {
        self.sample_ids[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[S], usize)> + '_ {
        (0..self.len()).map(move |i| (self.sample_ids[i], self.sample(i), self.labels[i]))
    }

    /// Rows whose sample id is in `ids`, in the order given. Ids keep their
    /// original values.
    pub fn select_ids(&self, ids: &[usize]) -> Result<Self> {
        let mut position = std::collections::HashMap::with_capacity(self.len());
        for (pos, &id) in self.sample_ids.iter().enumerate() {
            position.insert(id, pos);
        }
        let mut features = Vec::with_capacity(ids.len() * self.n_dims);
        let mut labels = Vec::with_capacity(ids.len());
        for &id in ids {
            let &pos = position.get(&id).ok_or_else(|| {
                Error::InvalidInput(format!("sample id {id} is not part of this dataset"))
            })?;
            features.extend_from_slice(self.sample(pos));
            labels.push(self.labels[pos]);
        }
        let mut out = Self::with_ids(features, self.n_dims, labels, self.n_classes, ids.to_vec())?;
        out.image_shape = self.image_shape;
        Ok(out)
    }

    /// First `n` rows (or all of them if the dataset is smaller).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            features: self.features[..n * self.n_dims].to_vec(),
            n_dims: self.n_dims,
            labels: self.labels[..n].to_vec(),
            n_classes: self.n_classes,
            sample_ids: self.sample_ids[..n].to_vec(),
            image_shape: self.image_shape,
        }
    }
}

/// Permutation of `0..n` for one epoch, fixed by `(seed, epoch)`.
pub fn shuffled_order(n: usize, epoch: u64, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, epoch));
    order
}
