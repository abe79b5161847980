//! Small synthetic classification datasets with fixed train/val/test splits.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A labelled dataset split into train, validation, and test ranges.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
    train_end: usize,
    val_end: usize,
}

impl SyntheticDataset {
    /// Split fractions are fixed at 60/20/20.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid("feature and label counts differ"));
        }
        if features.len() < 5 {
            return Err(Error::invalid("dataset too small to split"));
        }
        let n_features = features[0].len();
        if features.iter().any(|f| f.len() != n_features) {
            return Err(Error::invalid("ragged feature rows"));
        }
        if labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::invalid("label outside class range"));
        }
        let n = features.len();
        let train_end = n * 6 / 10;
        let val_end = train_end + n * 2 / 10;
        Ok(Self {
            features,
            labels,
            n_features,
            n_classes,
            train_end,
            val_end,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn train_indices(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn val_indices(&self) -> std::ops::Range<usize> {
        self.train_end..self.val_end
    }

    pub fn test_indices(&self) -> std::ops::Range<usize> {
        self.val_end..self.len()
    }

    /// Gaussian blobs: one well-separated cluster per class. Interleaves
    /// classes so every split sees every class.
    pub fn blobs(samples: usize, dim: usize, classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 || dim == 0 {
            return Err(Error::invalid("blobs need at least 2 classes and 1 dimension"));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let center_dist = Normal::new(0.0, 1.0).expect("valid normal");
        let noise = Normal::new(0.0, 0.4).expect("valid normal");
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..dim).map(|_| 3.0 * center_dist.sample(&mut rng)).collect())
            .collect();
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let class = i % classes;
            let point: Vec<f64> = centers[class]
                .iter()
                .map(|c| c + noise.sample(&mut rng))
                .collect();
            features.push(point);
            labels.push(class);
        }
        Self::new(features, labels, classes)
    }

    /// Two concentric rings in the plane.
    pub fn rings(samples: usize, seed: u64) -> Result<Self> {
        let mut rng = StdRng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).expect("valid normal");
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let class = i % 2;
            let radius = if class == 0 { 1.0 } else { 2.0 };
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            features.push(vec![
                radius * angle.cos() + noise.sample(&mut rng),
                radius * angle.sin() + noise.sample(&mut rng),
            ]);
            labels.push(class);
        }
        Self::new(features, labels, 2)
    }

    /// Noisy XOR: the label is the parity of the quadrant signs.
    pub fn xor_grid(samples: usize, noise_std: f64, seed: u64) -> Result<Self> {
        if !noise_std.is_finite() || noise_std < 0.0 {
            return Err(Error::invalid("noise std must be non-negative and finite"));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_std.max(1e-12)).expect("valid normal");
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x = rng.random::<f64>() * 2.0 - 1.0;
            let y = rng.random::<f64>() * 2.0 - 1.0;
            let label = usize::from((x > 0.0) != (y > 0.0));
            features.push(vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]);
            labels.push(label);
        }
        Self::new(features, labels, 2)
    }
}
