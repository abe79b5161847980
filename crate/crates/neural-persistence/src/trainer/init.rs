//! Weight initialization schemes.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{Error, Result};
use crate::layer::{NetworkSnapshot, WeightedBipartiteLayer};

use super::MlpSpec;

/// How weights are drawn at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Zero-mean normal with std = sqrt(2 / (fan_in + fan_out)).
    Xavier,
    Gaussian { std: f64 },
    Uniform { low: f64, high: f64 },
    /// Beta-distributed positive weights; small alpha concentrates almost
    /// all mass near zero with rare large values.
    Beta { alpha: f64, beta: f64 },
}

impl InitScheme {
    fn validate(&self) -> Result<()> {
        match *self {
            InitScheme::Xavier => Ok(()),
            InitScheme::Gaussian { std } => {
                if std > 0.0 && std.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gaussian std must be positive, got {std}")))
                }
            }
            InitScheme::Uniform { low, high } => {
                if low < high && low.is_finite() && high.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("uniform bounds ({low}, {high}) are invalid")))
                }
            }
            InitScheme::Beta { alpha, beta } => {
                if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("beta parameters ({alpha}, {beta}) are invalid")))
                }
            }
        }
    }

    /// Fill one fan_out x fan_in matrix, row-major.
    pub(super) fn sample_matrix(
        &self,
        fan_out: usize,
        fan_in: usize,
        rng: &mut StdRng,
    ) -> Vec<f64> {
        let count = fan_out * fan_in;
        match *self {
            InitScheme::Xavier => {
                let dist = Normal::new(0.0, (2.0 / (fan_in + fan_out) as f64).sqrt())
                    .expect("positive std");
                (0..count).map(|_| dist.sample(rng)).collect()
            }
            InitScheme::Gaussian { std } => {
                let dist = Normal::new(0.0, std).expect("validated std");
                (0..count).map(|_| dist.sample(rng)).collect()
            }
            InitScheme::Uniform { low, high } => (0..count)
                .map(|_| rng.random::<f64>() * (high - low) + low)
                .collect(),
            InitScheme::Beta { alpha, beta } => {
                let dist = Beta::new(alpha, beta).expect("validated parameters");
                (0..count).map(|_| dist.sample(rng)).collect()
            }
        }
    }
}

/// Deterministically draw the weight matrices of `spec` and package them as
/// a step-0 snapshot.
pub fn init_weights(spec: &MlpSpec, scheme: InitScheme, seed: u64) -> Result<NetworkSnapshot> {
    scheme.validate()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.layer_sizes().len() - 1);
    for pair in spec.layer_sizes().windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let weights = scheme.sample_matrix(fan_out, fan_in, &mut rng);
        layers.push(WeightedBipartiteLayer::dense(fan_out, fan_in, weights)?);
    }
    NetworkSnapshot::new(0, layers)
}
