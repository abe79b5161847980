//! Scalar complexity measures on persistence diagrams: the persistence
//! p-norm (neural persistence), its range and order-statistic bounds, and
//! the normalized / mean normalized variants used to compare layers and
//! networks of different sizes.

use crate::diagram::{EssentialPolicy, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::filtration::{compute_diagram, transform_weights};
use crate::layer::{NetworkSnapshot, WeightedBipartiteLayer};

/// Neural persistence of a diagram: the p-norm of its persistences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuralPersistenceValue {
    pub value: f64,
    pub p: f64,
    pub normalized: bool,
}

/// Lower and upper bound on a neural persistence value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPair {
    pub lower: f64,
    pub upper: f64,
}

/// Which divisor range normalization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationRange {
    /// Divide by the bound at the full transformed range [0, 1]. Keeps the
    /// divisor architecture-only, so values are comparable across epochs
    /// and networks. Default.
    Full,
    /// Divide by the bound at the observed (max' - min') range of the layer.
    Observed,
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::invalid(format!("norm exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `x^p` with fast paths for the common integer exponents.
pub(crate) fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p == 3.0 {
        x * x * x
    } else {
        x.powf(p)
    }
}

/// `x^(1/p)` with fast paths for the common integer exponents.
pub(crate) fn root_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else if p == 3.0 {
        x.cbrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// p-norm of the diagram: `(sum (1 - death)^p)^(1/p)` over every point the
/// diagram's essential policy exposes.
pub fn neural_persistence(diagram: &PersistenceDiagram, p: f64) -> Result<NeuralPersistenceValue> {
    check_p(p)?;
    let sum: f64 = diagram.deaths().map(|d| pow_p(1.0 - d, p)).sum();
    Ok(NeuralPersistenceValue {
        value: root_p(sum, p),
        p,
        normalized: false,
    })
}

/// Range-based upper bound `(max' - min') * (n - 1)^(1/p)` with
/// `n = in_count + out_count` and max'/min' the extreme transformed weights.
pub fn theoretical_upper_bound(
    layer: &WeightedBipartiteLayer,
    global_max: f64,
    p: f64,
) -> Result<f64> {
    check_p(p)?;
    let transformed = transform_weights(layer, global_max)?;
    let max = transformed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = transformed.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = layer.vertex_count() as f64;
    Ok((max - min) * root_p(n - 1.0, p))
}

/// Order-statistic bounds from the k largest and k smallest transformed
/// weights: `lower = ||1 - w_max_vec||_p`, `upper = ||1 - w_min_vec||_p`.
/// `sorted` must be non-descending; `k` is the number of finite points the
/// diagram will contain (vertices minus surviving components). The sandwich
/// `lower <= NP <= upper` is guaranteed for that k; other vector lengths
/// (such as the full vertex count) can be queried but may not bound NP.
pub fn empirical_bounds(sorted: &[f64], k: usize, p: f64) -> Result<BoundsPair> {
    check_p(p)?;
    if k > sorted.len() {
        return Err(Error::invalid(format!(
            "cannot select {k} weights out of {}",
            sorted.len()
        )));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let lower: f64 = sorted[sorted.len() - k..]
        .iter()
        .map(|w| pow_p(1.0 - w, p))
        .sum();
    let upper: f64 = sorted[..k].iter().map(|w| pow_p(1.0 - w, p)).sum();
    Ok(BoundsPair {
        lower: root_p(lower, p),
        upper: root_p(upper, p),
    })
}

/// `empirical_bounds` evaluated for a layer, with k taken from its diagram.
pub fn empirical_bounds_for_layer(
    layer: &WeightedBipartiteLayer,
    global_max: f64,
    p: f64,
) -> Result<BoundsPair> {
    let diagram = compute_diagram(layer, global_max, EssentialPolicy::Skip)?;
    let mut sorted = transform_weights(layer, global_max)?;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    empirical_bounds(&sorted, diagram.finite_points().len(), p)
}

/// Neural persistence divided by the full-range upper bound
/// `(1 - 0) * (n - 1)^(1/p)`. Under the `Skip` policy the result lies in
/// [0, 1]; under `DeathZero` the essential points can push it above 1, by
/// at most `(n / (n - 1))^(1/p) - 1`.
pub fn normalized_neural_persistence(
    layer: &WeightedBipartiteLayer,
    global_max: f64,
    p: f64,
    policy: EssentialPolicy,
) -> Result<f64> {
    normalized_neural_persistence_with_range(layer, global_max, p, policy, NormalizationRange::Full)
}

/// Normalized neural persistence with an explicit choice of divisor range.
pub fn normalized_neural_persistence_with_range(
    layer: &WeightedBipartiteLayer,
    global_max: f64,
    p: f64,
    policy: EssentialPolicy,
    range: NormalizationRange,
) -> Result<f64> {
    let n = layer.vertex_count();
    if n < 2 {
        return Err(Error::invalid("normalization needs at least 2 vertices"));
    }
    let np = neural_persistence(&compute_diagram(layer, global_max, policy)?, p)?;
    let divisor = match range {
        NormalizationRange::Full => root_p(n as f64 - 1.0, p),
        NormalizationRange::Observed => {
            let bound = theoretical_upper_bound(layer, global_max, p)?;
            if bound == 0.0 {
                // Constant layer: NP is exactly 0, define 0/0 as 0.
                return Ok(0.0);
            }
            bound
        }
    };
    Ok(np.value / divisor)
}

/// Mean of the per-layer normalized neural persistences, with the weight
/// transform taken over the whole network. Layer order fixes the summation
/// order, so results are deterministic.
pub fn mean_normalized_neural_persistence(
    network: &NetworkSnapshot,
    p: f64,
    policy: EssentialPolicy,
) -> Result<f64> {
    let global_max = network.global_max_abs_weight();
    if global_max == 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    let mut sum = 0.0;
    for layer in network.layers() {
        sum += normalized_neural_persistence(layer, global_max, p, policy)?;
    }
    Ok(sum / network.layer_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::SparseEntry;

    fn k22() -> WeightedBipartiteLayer {
        WeightedBipartiteLayer::from_rows(&[vec![1.0, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn np_of_k22_is_sqrt_half() {
        let diagram = compute_diagram(&k22(), 1.0, EssentialPolicy::Skip).unwrap();
        let np = neural_persistence(&diagram, 2.0).unwrap();
        assert!((np.value - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(np.p, 2.0);
        assert!(!np.normalized);
    }

    #[test]
    fn np_is_zero_when_all_deaths_are_one() {
        let layer = WeightedBipartiteLayer::dense(2, 3, vec![0.4; 6]).unwrap();
        let diagram = compute_diagram(&layer, 0.4, EssentialPolicy::Skip).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert_eq!(neural_persistence(&diagram, p).unwrap().value, 0.0);
        }
    }

    #[test]
    fn np_of_one_high_death_and_uniform_rest() {
        // Deaths {1.0, 0.5, 0.5}: one zero-persistence point plus (n - 2)
        // points of persistence 0.5 for n = 4 vertices.
        let diagram = compute_diagram(&k22(), 1.0, EssentialPolicy::Skip).unwrap();
        let np = neural_persistence(&diagram, 2.0).unwrap();
        assert!((np.value - 0.5 * 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn np_rejects_p_below_one() {
        let diagram = compute_diagram(&k22(), 1.0, EssentialPolicy::Skip).unwrap();
        assert!(neural_persistence(&diagram, 0.5).is_err());
    }

    #[test]
    fn theoretical_bound_on_k22() {
        let bound = theoretical_upper_bound(&k22(), 1.0, 2.0).unwrap();
        assert!((bound - 0.5 * 3.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn theoretical_bound_of_constant_layer_is_zero() {
        let layer = WeightedBipartiteLayer::dense(5, 2, vec![1.5; 10]).unwrap();
        assert_eq!(theoretical_upper_bound(&layer, 1.5, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn theoretical_bound_with_full_range_weights_and_p1() {
        // Weights spanning {0, ..., global_max} at p = 1 give exactly n - 1.
        let layer = WeightedBipartiteLayer::from_rows(&[vec![0.0, 0.5], vec![1.0, 0.25]]).unwrap();
        assert_eq!(theoretical_upper_bound(&layer, 1.0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn empirical_bounds_on_k22_weights() {
        let bounds = empirical_bounds(&[0.5, 0.5, 0.5, 1.0], 3, 2.0).unwrap();
        assert!((bounds.lower - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((bounds.upper - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empirical_bounds_of_constant_weights_coincide() {
        let bounds = empirical_bounds(&[0.25; 6], 4, 2.0).unwrap();
        let expected = 0.75 * 4.0f64.sqrt();
        assert!((bounds.lower - expected).abs() < 1e-15);
        assert!((bounds.upper - expected).abs() < 1e-15);
    }

    #[test]
    fn empirical_bounds_reject_oversized_k() {
        assert!(empirical_bounds(&[0.5, 1.0], 3, 2.0).is_err());
    }

    #[test]
    fn empirical_bounds_sandwich_np_on_k22() {
        let diagram = compute_diagram(&k22(), 1.0, EssentialPolicy::Skip).unwrap();
        let np = neural_persistence(&diagram, 2.0).unwrap().value;
        let bounds = empirical_bounds_for_layer(&k22(), 1.0, 2.0).unwrap();
        assert!(bounds.lower <= np + 1e-15);
        assert!(np <= bounds.upper + 1e-15);
        assert!((np - bounds.lower).abs() < 1e-15);
    }

    #[test]
    fn normalized_np_of_k22() {
        let v = normalized_neural_persistence(&k22(), 1.0, 2.0, EssentialPolicy::Skip).unwrap();
        assert!((v - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalized_np_of_constant_layer_is_zero() {
        let layer = WeightedBipartiteLayer::dense(4, 4, vec![0.3; 16]).unwrap();
        assert_eq!(
            normalized_neural_persistence(&layer, 0.3, 2.0, EssentialPolicy::Skip).unwrap(),
            0.0
        );
        assert_eq!(
            normalized_neural_persistence_with_range(
                &layer,
                0.3,
                2.0,
                EssentialPolicy::Skip,
                NormalizationRange::Observed
            )
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn one_strong_edge_layer_approaches_the_bound() {
        // One edge at the transform maximum, the rest at zero. The first
        // merge dies at 1 and the other n - 2 merges die at 0, so the
        // normalized value is ((n - 2) / (n - 1))^(1/p), just below 1.
        let mut weights = vec![0.0; 12];
        weights[0] = 1.0;
        let layer = WeightedBipartiteLayer::dense(3, 4, weights).unwrap();
        let v = normalized_neural_persistence(&layer, 1.0, 2.0, EssentialPolicy::Skip).unwrap();
        assert!((v - (5.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn all_zero_layer_with_external_max_realizes_the_bound() {
        // Every merge dies at 0, so NP = (n - 1)^(1/p) and the normalized
        // value is exactly 1.
        let layer = WeightedBipartiteLayer::dense(3, 4, vec![0.0; 12]).unwrap();
        let v = normalized_neural_persistence(&layer, 2.5, 2.0, EssentialPolicy::Skip).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn mean_normalized_is_arithmetic_mean() {
        // A layer with normalized value x paired with an all-zero-weight
        // layer (normalized value 1 under the shared global max): the mean
        // must be (x + 1) / 2.
        let a = k22();
        let b = WeightedBipartiteLayer::dense(2, 2, vec![0.0; 4]).unwrap();
        let x = normalized_neural_persistence(&a, 1.0, 2.0, EssentialPolicy::Skip).unwrap();
        let snap = NetworkSnapshot::new(0, vec![a, b]).unwrap();
        let mean = mean_normalized_neural_persistence(&snap, 2.0, EssentialPolicy::Skip).unwrap();
        assert!((mean - (x + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mean_normalized_of_single_layer_equals_layer_value() {
        let snap = NetworkSnapshot::new(0, vec![k22()]).unwrap();
        let mean = mean_normalized_neural_persistence(&snap, 2.0, EssentialPolicy::Skip).unwrap();
        let single =
            normalized_neural_persistence(&k22(), 1.0, 2.0, EssentialPolicy::Skip).unwrap();
        assert_eq!(mean, single);
    }

    #[test]
    fn mean_normalized_rejects_all_zero_network() {
        let layer = WeightedBipartiteLayer::dense(2, 2, vec![0.0; 4]).unwrap();
        let snap = NetworkSnapshot::new(0, vec![layer]).unwrap();
        assert!(matches!(
            mean_normalized_neural_persistence(&snap, 2.0, EssentialPolicy::Skip),
            Err(Error::DegenerateNetwork)
        ));
    }

    #[test]
    fn gaussian_nets_have_higher_mean_normalized_np_than_uniform() {
        use crate::trainer::{init_weights, InitScheme, MlpSpec};
        let spec = MlpSpec::new(vec![16, 12, 8]).unwrap();
        let mean_over_seeds = |scheme: InitScheme| {
            (0..50)
                .map(|seed| {
                    let snap = init_weights(&spec, scheme, seed).unwrap();
                    mean_normalized_neural_persistence(&snap, 2.0, EssentialPolicy::Skip).unwrap()
                })
                .sum::<f64>()
                / 50.0
        };
        let gaussian = mean_over_seeds(InitScheme::Gaussian { std: 1.0 });
        let uniform = mean_over_seeds(InitScheme::Uniform { low: -1.0, high: 1.0 });
        assert!(
            gaussian > uniform,
            "gaussian {gaussian} should exceed uniform {uniform}"
        );
    }

    #[test]
    fn death_zero_policy_adds_essential_mass() {
        let layer = WeightedBipartiteLayer::sparse(
            2,
            2,
            vec![
                SparseEntry { row: 0, col: 0, weight: 1.0 },
                SparseEntry { row: 1, col: 1, weight: 1.0 },
            ],
        )
        .unwrap();
        let skip = compute_diagram(&layer, 1.0, EssentialPolicy::Skip).unwrap();
        assert_eq!(neural_persistence(&skip, 2.0).unwrap().value, 0.0);
        let zero = skip.with_policy(EssentialPolicy::DeathZero);
        assert!((neural_persistence(&zero, 2.0).unwrap().value - 2.0f64.sqrt()).abs() < 1e-15);
    }
}
