#![allow(dead_code)]

use lazyprop::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse, image-like blobs in `[0, 1]^dims`: class `c` lights up its own
/// band of pixels, plus noise. Roughly a quarter of the entries are exact
/// zeros.
pub fn blobs(n: usize, dims: usize, classes: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = (dims / classes).max(1);
    let mut features = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.random_range(0..classes);
        for d in 0..dims {
            let on = d / band == label;
            let v: f64 = if rng.random_bool(0.25) {
                0.0
            } else if on {
                rng.random_range(0.4..1.0)
            } else {
                rng.random_range(0.0..0.5)
            };
            // quantize like 8-bit pixels so IDX export is lossless
            features.push((v * 255.0).round() / 255.0);
        }
        labels.push(label);
    }
    Dataset::new(features, dims, labels, classes).unwrap()
}
