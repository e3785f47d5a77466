//! Seeded two-dimensional toy datasets with two balanced classes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Two Gaussian clusters, linearly separable for small noise.
    Blobs,
    /// Two interleaved half-circles; not linearly separable.
    Moons,
}

impl SynthKind {
    pub fn from_name(name: &str) -> Option<SynthKind> {
        match name {
            "blobs" => Some(SynthKind::Blobs),
            "moons" => Some(SynthKind::Moons),
            _ => None,
        }
    }
}

/// Generates `n` points with classes alternating row by row, so class counts
/// differ by at most one. Noise is the standard deviation of Gaussian jitter
/// added to both coordinates; the base positions are deterministic, so
/// `noise = 0` gives exactly reproducible geometry.
pub fn synth_2d(kind: SynthKind, n: usize, noise: f64, seed: u64) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::InvalidArg(format!(
            "synthetic dataset needs n >= 2, got {}",
            n
        )));
    }
    if !(noise >= 0.0) {
        return Err(DataError::InvalidArg(format!("noise {} must be >= 0", noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid std");

    let class_size = |class: usize| n / 2 + if n % 2 == 1 && class == 0 { 1 } else { 0 };
    let mut features = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let idx_in_class = i / 2;
        let m = class_size(class);
        let frac = if m > 1 {
            idx_in_class as f64 / (m - 1) as f64
        } else {
            0.0
        };
        let (mut x, mut y) = match kind {
            SynthKind::Blobs => {
                if class == 0 {
                    (0.0, 0.0)
                } else {
                    (3.0, 3.0)
                }
            }
            SynthKind::Moons => {
                let t = std::f64::consts::PI * frac;
                if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                }
            }
        };
        if noise > 0.0 {
            x += jitter.sample(&mut rng);
            y += jitter.sample(&mut rng);
        }
        features.push(x);
        features.push(y);
        labels.push(class);
    }
    Dataset::from_parts_classification(features, 2, labels, 2)
}
